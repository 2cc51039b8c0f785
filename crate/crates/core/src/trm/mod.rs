//! Timed reward machines: syntax, parsing, and exact semantics.

pub mod guard;
pub mod label;
pub mod machine;
pub mod parse;
pub mod semantics;

pub use guard::{ClockId, CmpOp, Guard, GuardAtom, Interval};
pub use label::{admissible_labels, LabelFormula, PropSet};
pub use machine::{MaxConstants, StateId, StateReward, Transition, Trm, TrmBuilder, Violation};
pub use parse::{audit_completeness, parse_trm, parse_trm_report, Gap, Parsed};
pub use semantics::{
    accrual_factor, accrue_state_reward, ClockValuation, Decision, Run, RunStep, Semantics, StepOutcome,
    TimedLetter, TimedWord, Trajectory,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrmError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: undeclared {kind} `{name}`")]
    Undeclared { line: usize, kind: &'static str, name: String },
    #[error("line {line}: {source}")]
    Unsatisfiable {
        line: usize,
        #[source]
        source: guard::UnsatisfiableGuard,
    },
    #[error("nondeterministic transitions {first} and {second} from state {state} (both fire on {witness})")]
    Nondeterministic {
        state: String,
        first: String,
        second: String,
        witness: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("no transition fires at step {step}")]
    NoMatch { step: usize },
    #[error("discount factor {0} is outside (0, 1)")]
    InvalidDiscount(f64),
}

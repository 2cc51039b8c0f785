//! Exact semantics: stepping on timed words, runs, and discounted returns.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::label::PropSet;
use super::machine::{StateId, Trm};
use super::TrmError;

/// Time domain and state-reward accrual rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Semantics {
    /// Integer delays; state rewards accrue as a geometric sum.
    Digital,
    /// Real delays; state rewards accrue as an integral of `γ^t`.
    RealTime,
}

impl std::str::FromStr for Semantics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "digital" => Ok(Semantics::Digital),
            "real-time" | "realtime" | "real" => Ok(Semantics::RealTime),
            other => Err(format!("unknown semantics `{other}` (expected digital or real-time)")),
        }
    }
}

/// Clock values. `f64::INFINITY` marks a clock that exceeded its bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ClockValuation(pub Vec<f64>);

impl ClockValuation {
    pub fn zeros(n: usize) -> Self {
        ClockValuation(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `v + d`, saturating clock `x` to `∞` once it exceeds `bounds[x]`.
    pub fn elapse(&self, delay: f64, bounds: Option<&[u32]>) -> ClockValuation {
        let mut out: Vec<f64> = self.0.iter().map(|v| v + delay).collect();
        if let Some(b) = bounds {
            for (v, m) in out.iter_mut().zip(b) {
                if *v > *m as f64 {
                    *v = f64::INFINITY;
                }
            }
        }
        ClockValuation(out)
    }

    /// `[ρ]v`: the listed clocks are set to zero.
    pub fn reset(&self, clocks: &[usize]) -> ClockValuation {
        let mut out = self.0.clone();
        for c in clocks {
            out[*c] = 0.0;
        }
        ClockValuation(out)
    }

    /// Largest per-clock distance, `‖a − b‖∞`.
    pub fn chebyshev(&self, other: &ClockValuation) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for ClockValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if v.is_infinite() {
                write!(f, "∞")?;
            } else {
                write!(f, "{v}")?;
            }
        }
        write!(f, "]")
    }
}

/// Result of firing one transition.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub transition: usize,
    pub target: StateId,
    pub valuation: ClockValuation,
    pub transition_reward: f64,
}

/// `(1 − γ^d)/(1 − γ)` for digital time, `(1 − γ^d)/(−ln γ)` for real time.
pub fn accrual_factor(d: f64, gamma: f64, semantics: Semantics) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let num = 1.0 - gamma.powf(d);
    match semantics {
        Semantics::Digital => num / (1.0 - gamma),
        Semantics::RealTime => num / -gamma.ln(),
    }
}

/// State reward accrued over a delay `d` at rate `rate`.
pub fn accrue_state_reward(rate: f64, d: f64, gamma: f64, semantics: Semantics) -> Result<f64, TrmError> {
    check_gamma(gamma)?;
    if !(d >= 0.0) {
        return Err(TrmError::Invalid(format!("negative delay {d}")));
    }
    Ok(accrual_factor(d, gamma, semantics) * rate)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<(), TrmError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(TrmError::InvalidDiscount(gamma))
    }
}

impl Trm {
    /// Fires the transition enabled at `(u, v + delay)` on `label`. Clocks are
    /// saturated against `bounds` when given.
    pub fn step_bounded(
        &self,
        u: StateId,
        v: &ClockValuation,
        delay: f64,
        label: PropSet,
        bounds: Option<&[u32]>,
    ) -> Option<StepOutcome> {
        let advanced = v.elapse(delay, bounds);
        let t = self.fire(u, label, |g| g.satisfied_by(advanced.values()))?;
        let tr = self.transition(t);
        Some(StepOutcome {
            transition: t,
            target: tr.target,
            valuation: advanced.reset(&tr.resets),
            transition_reward: tr.reward,
        })
    }

    /// Exact (unsaturated) step.
    pub fn step(&self, u: StateId, v: &ClockValuation, delay: f64, label: PropSet) -> Option<StepOutcome> {
        self.step_bounded(u, v, delay, label, None)
    }

    /// Folds [`Trm::step`] over a timed word from `(u0, 0)`. The run stops at
    /// the first terminal state.
    pub fn run(&self, word: &TimedWord) -> Result<Run, TrmError> {
        let mut u = self.initial();
        let mut v = ClockValuation::zeros(self.num_clocks());
        let mut steps = Vec::new();
        for (index, letter) in word.letters.iter().enumerate() {
            if self.is_terminal(u) {
                break;
            }
            if !(letter.delay >= 0.0) {
                return Err(TrmError::Invalid(format!("negative delay at step {index}")));
            }
            let out = self
                .step(u, &v, letter.delay, letter.label)
                .ok_or(TrmError::NoMatch { step: index })?;
            steps.push(RunStep {
                source: u,
                source_valuation: v,
                delay: letter.delay,
                transition: out.transition,
                transition_reward: out.transition_reward,
                state_rate: self.state_rate(u, letter.env_state.as_deref()),
                target: out.target,
                target_valuation: out.valuation.clone(),
            });
            u = out.target;
            v = out.valuation;
        }
        Ok(Run {
            steps,
            final_state: u,
            final_valuation: v,
        })
    }

    /// Discounted return of an environment trajectory: each decision `i`
    /// contributes `γ^{t_i}·(r^θ_i + r^u_i)` with `t_i = Σ_{j<i}(d_j + 1)`.
    pub fn discounted_return(&self, trajectory: &Trajectory, gamma: f64, semantics: Semantics) -> Result<f64, TrmError> {
        check_gamma(gamma)?;
        let run = self.run(&trajectory.timed_word())?;
        let mut t = 0.0;
        let mut total = 0.0;
        for (step, decision) in run.steps.iter().zip(&trajectory.decisions) {
            let r_u = accrual_factor(decision.delay, gamma, semantics) * step.state_rate;
            total += gamma.powf(t) * (step.transition_reward + r_u);
            t += decision.delay + 1.0;
        }
        Ok(total)
    }
}

/// One letter `(d, l)` of a timed word, plus the environment state in which
/// the delay elapses (used for environment-dependent state rewards).
#[derive(Clone, Debug, PartialEq)]
pub struct TimedLetter {
    pub delay: f64,
    pub label: PropSet,
    pub env_state: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimedWord {
    pub letters: Vec<TimedLetter>,
}

impl TimedWord {
    pub fn new(letters: impl IntoIterator<Item = (f64, PropSet)>) -> Self {
        TimedWord {
            letters: letters
                .into_iter()
                .map(|(delay, label)| TimedLetter {
                    delay,
                    label,
                    env_state: None,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunStep {
    pub source: StateId,
    pub source_valuation: ClockValuation,
    pub delay: f64,
    pub transition: usize,
    pub transition_reward: f64,
    /// `Δ_r^u(source)` in the environment state of this step.
    pub state_rate: f64,
    pub target: StateId,
    pub target_valuation: ClockValuation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Run {
    pub steps: Vec<RunStep>,
    pub final_state: StateId,
    pub final_valuation: ClockValuation,
}

impl Run {
    pub fn transitions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.transition).collect()
    }

    pub fn states(&self) -> Vec<StateId> {
        let mut out: Vec<StateId> = self.steps.iter().map(|s| s.source).collect();
        out.push(self.final_state);
        out
    }
}

/// A decision point of an environment trajectory: wait `delay`, act, and
/// observe `label` on the resulting environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub delay: f64,
    pub label: PropSet,
    pub env_state: Option<String>,
}

/// The parts of a trajectory `s_0·(d_0, a_0)·s_1 ⋯` that a machine reads.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub decisions: Vec<Decision>,
}

impl Trajectory {
    pub fn new(decisions: impl IntoIterator<Item = (f64, PropSet)>) -> Self {
        Trajectory {
            decisions: decisions
                .into_iter()
                .map(|(delay, label)| Decision {
                    delay,
                    label,
                    env_state: None,
                })
                .collect(),
        }
    }

    /// The induced word: every delay is offset by the unit action time.
    pub fn timed_word(&self) -> TimedWord {
        TimedWord {
            letters: self
                .decisions
                .iter()
                .map(|d| TimedLetter {
                    delay: d.delay + 1.0,
                    label: d.label,
                    env_state: d.env_state.clone(),
                })
                .collect(),
        }
    }

    /// Clamps every delay to at most `max`.
    pub fn bound_delays(&self, max: f64) -> Trajectory {
        Trajectory {
            decisions: self
                .decisions
                .iter()
                .map(|d| Decision {
                    delay: d.delay.min(max),
                    ..d.clone()
                })
                .collect(),
        }
    }

    /// Total elapsed time `Σ (d_i + 1)`.
    pub fn duration(&self) -> f64 {
        self.decisions.iter().map(|d| d.delay + 1.0).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accrual_zero_delay_is_zero() {
        for s in [Semantics::Digital, Semantics::RealTime] {
            assert_eq!(accrue_state_reward(-7.0, 0.0, 0.9, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn digital_accrual_matches_geometric_sum() {
        let r = accrue_state_reward(-2.0, 2.0, 0.9, Semantics::Digital).unwrap();
        assert!((r - -3.8).abs() < 1e-12);
    }

    #[test]
    fn real_time_accrual_matches_quadrature() {
        // midpoint rule on ∫_0^0.1 0.9^t dt
        let n = 10_000;
        let h = 0.1 / n as f64;
        let integral: f64 = (0..n).map(|i| 0.9f64.powf((i as f64 + 0.5) * h) * h).sum();
        let r = accrue_state_reward(-1.0, 0.1, 0.9, Semantics::RealTime).unwrap();
        assert!((r + integral).abs() < 1e-9);
        assert!((r - -0.0995).abs() < 5e-5);
    }

    #[test]
    fn gamma_out_of_range() {
        assert!(matches!(
            accrue_state_reward(1.0, 1.0, 1.0, Semantics::Digital),
            Err(TrmError::InvalidDiscount(_))
        ));
        assert!(accrue_state_reward(1.0, 1.0, 0.0, Semantics::RealTime).is_err());
    }

    #[test]
    fn elapse_saturates() {
        let v = ClockValuation(vec![4.0, 1.0]);
        let w = v.elapse(2.0, Some(&[5, 5]));
        assert!(w.0[0].is_infinite());
        assert_eq!(w.0[1], 3.0);
        assert_eq!(v.elapse(2.0, None).0[0], 6.0);
    }

    #[test]
    fn bound_delays_clamps() {
        let t = Trajectory::new([(2.0, PropSet::EMPTY), (7.0, PropSet::EMPTY), (0.0, PropSet::EMPTY)]);
        let b = t.bound_delays(5.0);
        let ds: Vec<f64> = b.decisions.iter().map(|d| d.delay).collect();
        assert_eq!(ds, vec![2.0, 5.0, 0.0]);
        let small = Trajectory::new([(1.0, PropSet::EMPTY)]);
        assert_eq!(small.bound_delays(5.0), small);
    }
}

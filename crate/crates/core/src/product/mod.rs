//! On-the-fly products of an environment with a timed reward machine.
//!
//! A product action packs a delay (and, for the corner abstraction, a
//! region successor index) together with an environment action into one
//! integer. Every product exposes the same interface so that the learner,
//! the evaluator and the explicit-MDP oracle are generic over it.

mod corner;
mod digital;
mod explicit;

pub use corner::{CornerProduct, CornerState, CornerMove};
pub use digital::{DigitalProduct, DigitalState, MAX_CLOCKS, SAT_TICKS};
pub use explicit::{explicit_product, value_iteration, ExplicitMdp, ExplicitError, ValueResult};

use std::fmt::Debug;
use std::hash::Hash;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, LabelMap, MissingProposition, SimRng};
use crate::trm::{PropSet, Semantics, StateId, Trm};

/// How time is abstracted in the product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Interpretation {
    /// Integer delays and clocks, geometric state-reward accrual.
    Digital,
    /// Delays and clocks on the `1/κ` grid, integral state-reward accrual.
    Discretized { kappa: u32 },
    /// Region/corner configurations with delay-successor actions.
    Corner,
    /// No delay actions; clocks still advance one unit per step.
    RewardMachine,
}

impl Interpretation {
    pub fn label(&self) -> String {
        match self {
            Interpretation::Digital => "digital".into(),
            Interpretation::Discretized { kappa } => format!("discretized-k{kappa}"),
            Interpretation::Corner => "corner".into(),
            Interpretation::RewardMachine => "reward-machine".into(),
        }
    }
}

impl FromStr for Interpretation {
    type Err = String;

    /// Accepts `digital`, `corner`, `reward-machine` (or `rm`), and
    /// `discretized` / `discretized:K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "digital" => Ok(Interpretation::Digital),
            "corner" => Ok(Interpretation::Corner),
            "reward-machine" | "rm" => Ok(Interpretation::RewardMachine),
            "discretized" => Ok(Interpretation::Discretized { kappa: 2 }),
            other => {
                if let Some(k) = other.strip_prefix("discretized:") {
                    let kappa = k.parse().map_err(|_| format!("bad kappa `{k}`"))?;
                    Ok(Interpretation::Discretized { kappa })
                } else {
                    Err(format!(
                        "unknown interpretation `{other}` (expected digital, discretized[:K], corner, reward-machine)"
                    ))
                }
            }
        }
    }
}

/// Product-level settings shared by all interpretations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductConfig {
    pub gamma: f64,
    /// Reward added when no machine transition fires.
    pub no_match_penalty: f64,
}

impl Default for ProductConfig {
    fn default() -> Self {
        ProductConfig {
            gamma: 0.999,
            no_match_penalty: 0.0,
        }
    }
}

/// Result of one product step.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome<S> {
    pub next: S,
    pub reward: f64,
    /// The machine entered a terminal state or nothing fired.
    pub terminal: bool,
    pub no_match: bool,
    /// Index of the machine transition taken.
    pub transition: Option<usize>,
    /// Observed labels over the machine's propositions.
    pub labels: PropSet,
}

/// A realized or imagined product transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience<S> {
    pub from: S,
    pub action: u32,
    pub reward: f64,
    pub to: S,
    pub delay: f64,
    pub terminal: bool,
    pub counterfactual: bool,
}

/// Counterfactual-imagining settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CfConfig {
    /// Chebyshev radius around the realized clock abstraction, in grid
    /// ticks (digital) or integer corner units (corner).
    pub radius: u32,
    /// Keep at most this many imagined experiences per step.
    pub top_k: usize,
    /// Also vary the machine state.
    pub vary_states: bool,
}

/// The interface the learner sees.
pub trait Product {
    type State: Clone + Eq + Hash + Debug;

    fn env(&self) -> &dyn Environment;

    fn trm(&self) -> &Trm;

    fn config(&self) -> &ProductConfig;

    /// Size of the action encoding space.
    fn num_actions(&self) -> usize;

    fn initial_state(&self, rng: &mut SimRng) -> Self::State;

    /// Legal actions in ascending encoding order; never empty.
    fn legal_actions(&self, x: &Self::State) -> Rc<[u32]>;

    /// Delay chosen by an action, in time units.
    fn delay(&self, action: u32) -> f64;

    fn env_action(&self, action: u32) -> usize;

    fn env_state(&self, x: &Self::State) -> usize;

    fn trm_state(&self, x: &Self::State) -> StateId;

    /// Human-readable rendering of an action.
    fn describe_action(&self, action: u32) -> String;

    /// The deterministic part of a step once the environment has moved to
    /// `env_next` emitting `env_labels`.
    fn successor(&self, x: &Self::State, action: u32, env_next: usize, env_labels: PropSet) -> Outcome<Self::State>;

    /// Samples the environment and applies [`Product::successor`].
    fn step(&self, x: &Self::State, action: u32, rng: &mut SimRng) -> Outcome<Self::State> {
        let out = self.env().step(self.env_state(x), self.env_action(action), rng);
        self.successor(x, action, out.next, out.labels)
    }

    /// Time semantics under which the machine's own return function
    /// reproduces this product's rewards, if any.
    fn reference_semantics(&self) -> Option<Semantics> {
        None
    }

    /// Imagined experiences sharing the realized environment transition.
    fn counterfactuals(
        &self,
        x: &Self::State,
        action: u32,
        env_next: usize,
        labels: PropSet,
        cf: &CfConfig,
    ) -> Vec<Experience<Self::State>>;
}

/// Pieces shared by the product implementations.
#[derive(Clone)]
pub(crate) struct Core {
    pub env: Arc<dyn Environment>,
    pub trm: Arc<Trm>,
    pub labels: LabelMap,
    /// `rates[u][s]`: state-reward rate of machine state `u` in env state `s`.
    pub rates: Vec<Vec<f64>>,
    /// Env states with identical rate columns share a class.
    pub rate_class: Vec<u32>,
    pub config: ProductConfig,
}

impl Core {
    pub fn new(env: Arc<dyn Environment>, trm: Arc<Trm>, config: ProductConfig) -> Result<Core, MissingProposition> {
        let labels = LabelMap::new(env.as_ref(), &trm)?;
        let names: Vec<String> = (0..env.num_states()).map(|s| env.state_name(s)).collect();
        let rates: Vec<Vec<f64>> = (0..trm.num_states())
            .map(|u| names.iter().map(|n| trm.state_rate(u, Some(n))).collect())
            .collect();
        let mut classes: Vec<Vec<u64>> = Vec::new();
        let rate_class = (0..env.num_states())
            .map(|s| {
                let col: Vec<u64> = rates.iter().map(|r| r[s].to_bits()).collect();
                match classes.iter().position(|c| *c == col) {
                    Some(i) => i as u32,
                    None => {
                        classes.push(col);
                        (classes.len() - 1) as u32
                    }
                }
            })
            .collect();
        Ok(Core {
            env,
            trm,
            labels,
            rates,
            rate_class,
            config,
        })
    }
}

/// Ranks candidates by reward (descending) with a stable key tie-break and
/// keeps the first `k`.
pub(crate) fn top_k_by_reward<T, K: Ord>(mut items: Vec<T>, k: usize, reward: impl Fn(&T) -> f64, key: impl Fn(&T) -> K) -> Vec<T> {
    items.sort_by(|a, b| reward(b).total_cmp(&reward(a)).then_with(|| key(a).cmp(&key(b))));
    items.truncate(k);
    items
}

/// Builds a product for an interpretation behind a uniform entry point.
pub enum AnyProduct {
    Digital(DigitalProduct),
    Corner(CornerProduct),
}

impl AnyProduct {
    pub fn new(
        env: Arc<dyn Environment>,
        trm: Arc<Trm>,
        interp: Interpretation,
        config: ProductConfig,
    ) -> Result<AnyProduct, MissingProposition> {
        Ok(match interp {
            Interpretation::Corner => AnyProduct::Corner(CornerProduct::new(env, trm, config)?),
            other => AnyProduct::Digital(DigitalProduct::new(env, trm, other, config)?),
        })
    }
}

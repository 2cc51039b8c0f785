//! Tabular Q-learning over product states with delay-discounted updates,
//! ε-greedy exploration restricted to legal actions, and counterfactual
//! replay.

mod eval;
mod train;

pub use eval::{evaluate, greedy_rollout, reference_return, EvalSummary, Rollout, RolloutStep};
pub use train::{train, write_metrics_csv, EpisodeMetrics, TrainOutput, METRICS_HEADER};

use std::hash::Hash;
use std::rc::Rc;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::env::SimRng;
use crate::product::{CfConfig, Experience, Interpretation, ProductConfig};

/// Hyperparameters of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub alpha0: f64,
    pub epsilon0: f64,
    /// Per-episode multiplier applied to both α and ε.
    pub decay: f64,
    pub alpha_min: f64,
    pub epsilon_min: f64,
    pub q_init: f64,
    pub max_global_steps: u64,
    /// Maximum decision points per episode.
    pub horizon: u32,
    pub counterfactuals: bool,
    pub r_crm: u32,
    pub top_k: usize,
    /// Let counterfactuals vary the machine state as well.
    pub vary_states: bool,
    pub interpretation: Interpretation,
    pub no_match_penalty: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            gamma: 0.999,
            alpha0: 0.9,
            epsilon0: 0.9,
            decay: 0.999,
            alpha_min: 0.01,
            epsilon_min: 0.01,
            q_init: 10.0,
            max_global_steps: 300_000,
            horizon: 200,
            counterfactuals: true,
            r_crm: 3,
            top_k: 15,
            vary_states: false,
            interpretation: Interpretation::Digital,
            no_match_penalty: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid learner configuration: {0}")]
pub struct ConfigError(pub String);

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return err("gamma must lie in (0, 1)");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return err("decay must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.alpha0) || !(0.0..=1.0).contains(&self.epsilon0) {
            return err("alpha0 and epsilon0 must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.alpha_min) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return err("floors must lie in [0, 1]");
        }
        if self.horizon == 0 {
            return err("horizon must be at least 1");
        }
        if !self.q_init.is_finite() || !self.no_match_penalty.is_finite() {
            return err("q_init and no_match_penalty must be finite");
        }
        if let Interpretation::Discretized { kappa } = self.interpretation {
            if kappa < 2 {
                return err("discretized interpretation needs kappa >= 2");
            }
        }
        Ok(())
    }

    pub fn product_config(&self) -> ProductConfig {
        ProductConfig {
            gamma: self.gamma,
            no_match_penalty: self.no_match_penalty,
        }
    }

    /// `None` when counterfactual replay is off.
    pub fn cf_config(&self) -> Option<CfConfig> {
        self.counterfactuals.then_some(CfConfig {
            radius: self.r_crm,
            top_k: self.top_k,
            vary_states: self.vary_states,
        })
    }
}

#[derive(Clone, Debug)]
struct Row {
    actions: Rc<[u32]>,
    values: Vec<f64>,
    max: f64,
}

impl Row {
    fn index(&self, action: u32) -> Option<usize> {
        self.actions.binary_search(&action).ok()
    }

    fn set(&mut self, i: usize, value: f64) {
        let old = self.values[i];
        self.values[i] = value;
        if value >= self.max {
            self.max = value;
        } else if old == self.max {
            self.max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
}

/// Sparse action values. A state's row is created on its first update and
/// holds every legal action, initialised to `q_init`.
#[derive(Clone, Debug)]
pub struct QTable<S> {
    q_init: f64,
    rows: FxHashMap<S, Row>,
}

impl<S: Clone + Eq + Hash> QTable<S> {
    pub fn new(q_init: f64) -> Self {
        QTable {
            q_init,
            rows: FxHashMap::default(),
        }
    }

    pub fn q_init(&self) -> f64 {
        self.q_init
    }

    pub fn get(&self, state: &S, action: u32) -> f64 {
        self.rows
            .get(state)
            .and_then(|r| r.index(action).map(|i| r.values[i]))
            .unwrap_or(self.q_init)
    }

    /// Maximum over the legal actions of `state`.
    pub fn max(&self, state: &S) -> f64 {
        self.rows.get(state).map(|r| r.max).unwrap_or(self.q_init)
    }

    /// Number of states with a row.
    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    /// Number of stored state-action values.
    pub fn num_entries(&self) -> usize {
        self.rows.values().map(|r| r.values.len()).sum()
    }

    /// All stored `(state, action, value)` triples.
    pub fn entries(&self) -> impl Iterator<Item = (&S, u32, f64)> {
        self.rows
            .iter()
            .flat_map(|(s, r)| r.actions.iter().zip(&r.values).map(move |(a, v)| (s, *a, *v)))
    }

    /// Greedy action among `legal` (sorted ascending); ties go to the lowest
    /// encoding.
    pub fn greedy(&self, state: &S, legal: &[u32]) -> Option<u32> {
        let row = self.rows.get(state);
        let mut best: Option<(u32, f64)> = None;
        for &a in legal {
            let v = row.and_then(|r| r.index(a).map(|i| r.values[i])).unwrap_or(self.q_init);
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a)
    }

    /// `Q[from, action] += α·(target − Q[from, action])`.
    pub fn update_towards(&mut self, from: &S, legal_from: impl FnOnce() -> Rc<[u32]>, action: u32, target: f64, alpha: f64) {
        let q_init = self.q_init;
        let row = self.rows.entry(from.clone()).or_insert_with(|| {
            let actions = legal_from();
            Row {
                values: vec![q_init; actions.len()],
                actions,
                max: q_init,
            }
        });
        let i = row.index(action).expect("update on an illegal action");
        let old = row.values[i];
        row.set(i, old + alpha * (target - old));
    }

    /// Delay-discounted Q-learning update for one experience: the successor
    /// value is discounted by `γ^{d+1}` and a terminal successor counts as 0.
    pub fn update(&mut self, e: &Experience<S>, legal_from: impl FnOnce() -> Rc<[u32]>, alpha: f64, gamma: f64) {
        let next = if e.terminal { 0.0 } else { self.max(&e.to) };
        let target = e.reward + gamma.powf(e.delay + 1.0) * next;
        self.update_towards(&e.from, legal_from, e.action, target, alpha);
    }
}

/// ε-greedy choice among `legal`. Always draws one uniform number; an
/// exploring step draws a second for the index. `None` when `legal` is
/// empty.
pub fn select_action<S: Clone + Eq + Hash>(
    q: &QTable<S>,
    state: &S,
    legal: &[u32],
    epsilon: f64,
    rng: &mut SimRng,
) -> Option<u32> {
    if legal.is_empty() {
        return None;
    }
    let u: f64 = rng.random();
    if u < epsilon {
        Some(legal[rng.random_range(0..legal.len())])
    } else {
        q.greedy(state, legal)
    }
}

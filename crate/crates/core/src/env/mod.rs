//! Labeled MDP environments.
//!
//! Environments are immutable descriptions; the current state and the RNG
//! are owned by the caller. Waiting never changes the environment state, so
//! delays are handled entirely by the product layer.

mod frozen_lake;
mod micro;
mod taxi;

pub use frozen_lake::{FrozenLake, MapError, DEFAULT_MAP};
pub use micro::{Grid2x2, Line3};
pub use taxi::Taxi;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trm::{PropSet, Trm};

/// RNG used by every simulation in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// The result of one environment transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnvOutcome {
    pub next: usize,
    /// `L(s, a, s')` over the environment's own proposition indices.
    pub labels: PropSet,
    /// Always false for the bundled environments; termination is decided by
    /// the machine.
    pub env_done: bool,
}

pub trait Environment: Send + Sync {
    fn name(&self) -> &str;

    fn num_states(&self) -> usize;

    fn num_actions(&self) -> usize;

    fn action_name(&self, a: usize) -> String;

    /// Name used to key environment-dependent state rewards.
    fn state_name(&self, s: usize) -> String;

    /// The declared proposition alphabet.
    fn propositions(&self) -> &[String];

    /// Initial state; deterministic for all bundled environments.
    fn reset(&self, rng: &mut SimRng) -> usize;

    /// The transition distribution `T(s, a, ·)` with duplicates merged, in a
    /// fixed order.
    fn transitions(&self, s: usize, a: usize) -> Vec<(usize, f64)>;

    /// `L(s, a, s')`.
    fn labels(&self, s: usize, a: usize, next: usize) -> PropSet;

    /// Samples `s' ~ T(s, a, ·)`. Consumes one uniform draw unless the
    /// transition is deterministic.
    fn step(&self, s: usize, a: usize, rng: &mut SimRng) -> EnvOutcome {
        let dist = self.transitions(s, a);
        let next = if dist.len() == 1 {
            dist[0].0
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = dist[dist.len() - 1].0;
            for (s2, p) in &dist {
                acc += p;
                if u < acc {
                    pick = *s2;
                    break;
                }
            }
            pick
        };
        EnvOutcome {
            next,
            labels: self.labels(s, a, next),
            env_done: false,
        }
    }

    fn action_index(&self, name: &str) -> Option<usize> {
        (0..self.num_actions()).find(|a| self.action_name(*a) == name)
    }
}

/// Translates environment label sets into a machine's proposition indices.
#[derive(Clone, Debug)]
pub struct LabelMap {
    /// `map[i]` is the machine index of environment proposition `i`.
    map: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("machine proposition `{0}` is not provided by the environment")]
pub struct MissingProposition(pub String);

impl LabelMap {
    pub fn new(env: &dyn Environment, trm: &Trm) -> Result<LabelMap, MissingProposition> {
        for p in trm.props() {
            if !env.propositions().contains(p) {
                return Err(MissingProposition(p.clone()));
            }
        }
        let map = env.propositions().iter().map(|p| trm.prop_id(p)).collect();
        Ok(LabelMap { map })
    }

    pub fn translate(&self, env_labels: PropSet) -> PropSet {
        let mut out = PropSet::EMPTY;
        for i in env_labels.iter() {
            if let Some(Some(j)) = self.map.get(i) {
                out.insert(*j);
            }
        }
        out
    }
}

/// Looks up a bundled environment by name. `map` overrides the FrozenLake
/// layout.
pub fn by_name(name: &str, map: Option<&str>) -> Result<Box<dyn Environment>, String> {
    match name {
        "taxi" => Ok(Box::new(Taxi::new())),
        "frozen_lake" | "frozen-lake" | "frozenlake" => {
            let env = match map {
                Some(text) => FrozenLake::from_map(text).map_err(|e| e.to_string())?,
                None => FrozenLake::default_map(),
            };
            Ok(Box::new(env))
        }
        "grid2x2" => Ok(Box::new(Grid2x2)),
        "line3" => Ok(Box::new(Line3)),
        other => Err(format!(
            "unknown environment `{other}` (expected taxi, frozen_lake, grid2x2 or line3)"
        )),
    }
}

/// Names accepted by [`by_name`].
pub const ENVIRONMENTS: [&str; 4] = ["taxi", "frozen_lake", "grid2x2", "line3"];

fn prop_names(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

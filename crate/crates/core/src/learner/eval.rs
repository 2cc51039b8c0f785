use serde::{Deserialize, Serialize};

use super::QTable;
use crate::env::{rng_from_seed, SimRng};
use crate::product::Product;
use crate::trm::{accrual_factor, Decision, Trajectory, TrmError};

/// One greedy decision point and what the environment did.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutStep {
    pub action: u32,
    pub env_state: usize,
    pub env_next: usize,
    pub env_labels: crate::trm::PropSet,
    pub delay: f64,
    pub reward: f64,
}

#[derive(Clone, Debug)]
pub struct Rollout<S> {
    pub initial: S,
    pub steps: Vec<RolloutStep>,
    pub discounted_return: f64,
    pub time: f64,
    pub terminal_reached: bool,
    pub no_match: bool,
}

/// Follows the greedy policy of `q` for at most `horizon` decisions.
pub fn greedy_rollout<P: Product>(p: &P, q: &QTable<P::State>, horizon: u32, rng: &mut SimRng) -> Rollout<P::State> {
    let gamma = p.config().gamma;
    let initial = p.initial_state(rng);
    let mut x = initial.clone();
    let mut r = Rollout {
        initial,
        steps: Vec::new(),
        discounted_return: 0.0,
        time: 0.0,
        terminal_reached: false,
        no_match: false,
    };
    let mut discount = 1.0;
    for _ in 0..horizon {
        let legal = p.legal_actions(&x);
        let Some(action) = q.greedy(&x, &legal) else {
            r.discounted_return += discount * p.config().no_match_penalty;
            r.no_match = true;
            break;
        };
        let env_out = p.env().step(p.env_state(&x), p.env_action(action), rng);
        let out = p.successor(&x, action, env_out.next, env_out.labels);
        let delay = p.delay(action);
        r.steps.push(RolloutStep {
            action,
            env_state: p.env_state(&x),
            env_next: env_out.next,
            env_labels: env_out.labels,
            delay,
            reward: out.reward,
        });
        r.discounted_return += discount * out.reward;
        discount *= gamma.powf(delay + 1.0);
        r.time += delay + 1.0;
        if out.terminal {
            r.terminal_reached = !out.no_match;
            r.no_match = out.no_match;
            break;
        }
        x = out.next;
    }
    r
}

/// Recomputes the return of a rollout by replaying its decisions through
/// the product's successor function.
fn replay_return<P: Product>(p: &P, r: &Rollout<P::State>) -> f64 {
    let gamma = p.config().gamma;
    let mut x = r.initial.clone();
    let (mut g, mut t) = (0.0, 0.0);
    for s in &r.steps {
        let out = p.successor(&x, s.action, s.env_next, s.env_labels);
        g += gamma.powf(t) * out.reward;
        t += s.delay + 1.0;
        x = out.next;
    }
    g
}

/// Return of a rollout computed by the machine's own semantics from the
/// raw trajectory. A final no-match step contributes its accrued state
/// reward plus the penalty.
pub fn reference_return<P: Product>(p: &P, r: &Rollout<P::State>) -> Option<Result<f64, TrmError>> {
    let semantics = p.reference_semantics()?;
    let gamma = p.config().gamma;
    let trm = p.trm();
    let labels = crate::env::LabelMap::new(p.env(), trm).expect("product was built with this machine");
    let decisions: Vec<Decision> = r
        .steps
        .iter()
        .map(|s| Decision {
            delay: s.delay,
            label: labels.translate(s.env_labels),
            env_state: Some(p.env().state_name(s.env_state)),
        })
        .collect();
    let matched = if r.no_match && !r.steps.is_empty() {
        decisions.len() - 1
    } else {
        decisions.len()
    };
    let prefix = Trajectory {
        decisions: decisions[..matched].to_vec(),
    };
    Some((|| {
        let mut g = trm.discounted_return(&prefix, gamma, semantics)?;
        if matched < decisions.len() {
            let run = trm.run(&prefix.timed_word())?;
            let last = &decisions[matched];
            let rate = trm.state_rate(run.final_state, last.env_state.as_deref());
            g += gamma.powf(prefix.duration())
                * (accrual_factor(last.delay, gamma, semantics) * rate + p.config().no_match_penalty);
        }
        Ok(g)
    })())
}

/// Greedy evaluation statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_time: f64,
    pub success_rate: f64,
    /// Largest gap between the accumulated return and its replay through
    /// the product.
    pub replay_error: f64,
    /// Largest gap between the accumulated return and the machine's own
    /// return of the raw trajectory; `None` for products without a
    /// reference semantics. Infinite when the machine rejects the
    /// trajectory.
    pub reference_error: Option<f64>,
}

/// Runs `episodes` greedy rollouts from a fresh RNG stream.
pub fn evaluate<P: Product>(p: &P, q: &QTable<P::State>, horizon: u32, episodes: usize, seed: u64) -> EvalSummary {
    let mut rng = rng_from_seed(seed);
    let mut returns = Vec::with_capacity(episodes);
    let (mut time, mut successes, mut replay_error) = (0.0, 0, 0.0f64);
    let mut reference_error: Option<f64> = None;
    for _ in 0..episodes {
        let r = greedy_rollout(p, q, horizon, &mut rng);
        replay_error = replay_error.max((replay_return(p, &r) - r.discounted_return).abs());
        if let Some(reference) = reference_return(p, &r) {
            let gap = reference.map_or(f64::INFINITY, |g| (g - r.discounted_return).abs());
            reference_error = Some(reference_error.unwrap_or(0.0).max(gap));
        }
        returns.push(r.discounted_return);
        time += r.time;
        successes += usize::from(r.terminal_reached);
    }
    let n = episodes.max(1) as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    EvalSummary {
        episodes,
        mean_return: mean,
        std_return: var.sqrt(),
        mean_time: time / n,
        success_rate: successes as f64 / n,
        replay_error,
        reference_error,
    }
}

//! Explicit enumeration of small products and value iteration, used as an
//! oracle for the learner.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rustc_hash::FxHashMap;

use super::Product;
use crate::env::rng_from_seed;

/// One action of an explicit state: its encoding, its delay, and the
/// outcomes `(probability, reward, successor or None when terminal)`.
#[derive(Clone, Debug)]
pub struct ExplicitAction {
    pub action: u32,
    pub delay: f64,
    pub outcomes: Vec<(f64, f64, Option<usize>)>,
}

#[derive(Clone, Debug)]
pub struct ExplicitMdp<S> {
    pub states: Vec<S>,
    pub actions: Vec<Vec<ExplicitAction>>,
    pub initial: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplicitError {
    #[error("product has more than {0} reachable states")]
    TooLarge(usize),
    #[error("value iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
}

/// Enumerates every product state reachable from the initial state using
/// the environment's transition table.
pub fn explicit_product<P: Product>(p: &P, limit: usize) -> Result<ExplicitMdp<P::State>, ExplicitError> {
    let mut rng = rng_from_seed(0);
    let start = p.initial_state(&mut rng);
    let mut index: FxHashMap<P::State, usize> = FxHashMap::default();
    let mut states = vec![start.clone()];
    index.insert(start, 0);
    let mut actions: Vec<Vec<ExplicitAction>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let x = states[i].clone();
        let mut acts = Vec::new();
        for &a in p.legal_actions(&x).iter() {
            let mut outcomes = Vec::new();
            for (s2, prob) in p.env().transitions(p.env_state(&x), p.env_action(a)) {
                let labels = p.env().labels(p.env_state(&x), p.env_action(a), s2);
                let out = p.successor(&x, a, s2, labels);
                let next = if out.terminal {
                    None
                } else {
                    let n = states.len();
                    let j = *index.entry(out.next.clone()).or_insert(n);
                    if j == n {
                        if n >= limit {
                            return Err(ExplicitError::TooLarge(limit));
                        }
                        states.push(out.next);
                        queue.push_back(j);
                    }
                    Some(j)
                };
                outcomes.push((prob, out.reward, next));
            }
            acts.push(ExplicitAction {
                action: a,
                delay: p.delay(a),
                outcomes,
            });
        }
        if actions.len() <= i {
            actions.resize_with(i + 1, Vec::new);
        }
        actions[i] = acts;
    }
    actions.resize_with(states.len(), Vec::new);
    Ok(ExplicitMdp {
        states,
        actions,
        initial: 0,
    })
}

impl<S: std::fmt::Debug> ExplicitMdp<S> {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Plain-text adjacency listing.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            let _ = writeln!(out, "{i}: {s:?}");
            for a in &self.actions[i] {
                for (p, r, n) in &a.outcomes {
                    let target = n.map(|j| j.to_string()).unwrap_or_else(|| "⊥".into());
                    let _ = writeln!(out, "  a{} d={} p={p} r={r} -> {target}", a.action, a.delay);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ValueResult {
    pub values: Vec<f64>,
    /// Greedy action encoding per state (lowest encoding on ties).
    pub policy: Vec<u32>,
    pub sweeps: usize,
}

/// Bellman backups with successor discount `γ^{d+1}` until the largest
/// change is below `tol`.
pub fn value_iteration<S>(mdp: &ExplicitMdp<S>, gamma: f64, tol: f64) -> Result<ValueResult, ExplicitError> {
    const MAX_SWEEPS: usize = 1_000_000;
    let n = mdp.states.len();
    let mut v = vec![0.0; n];
    let q = |v: &[f64], a: &ExplicitAction| -> f64 {
        let disc = gamma.powf(a.delay + 1.0);
        a.outcomes
            .iter()
            .map(|(p, r, next)| p * (r + next.map(|j| disc * v[j]).unwrap_or(0.0)))
            .sum()
    };
    for sweep in 1..=MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let best = mdp.actions[i].iter().map(|a| q(&v, a)).fold(f64::NEG_INFINITY, f64::max);
            let best = if best.is_finite() { best } else { 0.0 };
            delta = delta.max((best - v[i]).abs());
            v[i] = best;
        }
        if delta < tol {
            let policy = (0..n)
                .map(|i| {
                    // legal actions are listed in ascending encoding order
                    let mut best = (f64::NEG_INFINITY, 0u32);
                    for a in &mdp.actions[i] {
                        let val = q(&v, a);
                        if val > best.0 + 1e-12 {
                            best = (val, a.action);
                        }
                    }
                    best.1
                })
                .collect();
            return Ok(ValueResult {
                values: v,
                policy,
                sweeps: sweep,
            });
        }
    }
    Err(ExplicitError::NoConvergence(MAX_SWEEPS))
}

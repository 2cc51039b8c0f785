//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use timed_rm::regions::{Region, SATURATED};
use timed_rm::trm::{accrual_factor, parse_trm, Decision, PropSet, Semantics, Trajectory, Trm};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Knobs for [`random_machine`].
#[derive(Clone, Copy, Debug)]
pub struct MachineShape {
    pub max_states: usize,
    pub max_clocks: usize,
    pub max_constant: u32,
    /// Every state reward is strictly negative.
    pub negative_rates: bool,
    /// Reward range of transitions into the terminal state.
    pub terminal_reward: (f64, f64),
}

impl Default for MachineShape {
    fn default() -> Self {
        MachineShape {
            max_states: 4,
            max_clocks: 2,
            max_constant: 4,
            negative_rates: false,
            terminal_reward: (-5.0, 5.0),
        }
    }
}

const LABELS: [&str; 3] = ["{}", "p", "q"];

/// A complete deterministic machine over exclusive propositions `p`, `q`:
/// every (state, label) pair is either unguarded or split by a single
/// threshold on one clock.
pub fn random_machine(r: &mut ChaCha8Rng, shape: MachineShape) -> (String, Trm) {
    let n = r.random_range(1..=shape.max_states);
    let clocks = r.random_range(1..=shape.max_clocks);
    let clock_names: Vec<String> = (0..clocks).map(|c| format!("c{c}")).collect();
    let mut src = String::new();
    let states: Vec<String> = (0..n).map(|u| format!("u{u}")).collect();
    let _ = writeln!(src, "name: random");
    let _ = writeln!(src, "states: {}", states.join(" "));
    let _ = writeln!(src, "terminal: done");
    let _ = writeln!(src, "initial: u0");
    let _ = writeln!(src, "clocks: {}", clock_names.join(" "));
    let _ = writeln!(src, "props: p q");
    let _ = writeln!(src, "exclusive: p q");
    for u in &states {
        let rate = if shape.negative_rates {
            -r.random_range(0.1..3.0)
        } else {
            r.random_range(-3.0..1.0)
        };
        let _ = writeln!(src, "state_reward: {u} {rate}");
    }
    for u in &states {
        for label in LABELS {
            let target = |r: &mut ChaCha8Rng| -> (String, f64) {
                if r.random_bool(0.25) {
                    ("done".into(), r.random_range(shape.terminal_reward.0..shape.terminal_reward.1))
                } else {
                    (states.choose(r).unwrap().clone(), r.random_range(-2.0..3.0))
                }
            };
            let resets = |r: &mut ChaCha8Rng| -> String {
                let chosen: Vec<&str> = clock_names.iter().filter(|_| r.random_bool(0.4)).map(String::as_str).collect();
                if chosen.is_empty() {
                    String::new()
                } else {
                    format!(" | reset={}", chosen.join(","))
                }
            };
            if r.random_bool(0.3) {
                let (t, rew) = target(r);
                let rs = resets(r);
                let _ = writeln!(src, "trans: {u} -> {t} | label={label}{rs} | reward={rew}");
            } else {
                let x = clock_names.choose(r).unwrap();
                let c = r.random_range(0..=shape.max_constant);
                // `x<0` is unsatisfiable
                let (lo, hi) = if c == 0 || r.random_bool(0.5) { ("<=", ">") } else { ("<", ">=") };
                for op in [lo, hi] {
                    let (t, rew) = target(r);
                    let rs = resets(r);
                    let _ = writeln!(src, "trans: {u} -> {t} | label={label} | guard={x}{op}{c}{rs} | reward={rew}");
                }
            }
        }
    }
    let trm = parse_trm(&src).unwrap_or_else(|e| panic!("generated machine rejected: {e}\n{src}"));
    (src, trm)
}

/// Delays are multiples of `1/ticks` up to `max_delay`; labels are
/// admissible for the exclusive `p`, `q` of [`random_machine`].
pub fn random_trajectory(r: &mut ChaCha8Rng, len: usize, max_delay: u32, ticks: u32) -> Trajectory {
    Trajectory {
        decisions: (0..len)
            .map(|_| Decision {
                delay: r.random_range(0..=max_delay * ticks) as f64 / ticks as f64,
                label: match r.random_range(0..3) {
                    0 => PropSet::EMPTY,
                    i => PropSet::singleton(i - 1),
                },
                env_state: None,
            })
            .collect(),
    }
}

/// The largest constant appearing in any guard.
pub fn global_max_constant(trm: &Trm) -> u32 {
    let m = trm.max_constants();
    m.per_clock.iter().copied().max().unwrap_or(0).max(m.delay)
}

/// Suffix returns `G_i = R_i + γ^{d_i+1}·G_{i+1}` along the run of `t`
/// (truncated at the first terminal state).
pub fn suffix_returns(trm: &Trm, t: &Trajectory, gamma: f64, semantics: Semantics) -> Vec<f64> {
    let run = trm.run(&t.timed_word()).expect("complete machine");
    let mut out = vec![0.0; run.steps.len() + 1];
    for i in (0..run.steps.len()).rev() {
        let s = &run.steps[i];
        let d = t.decisions[i].delay;
        let r = s.transition_reward + accrual_factor(d, gamma, semantics) * s.state_rate;
        out[i] = r + gamma.powf(d + 1.0) * out[i + 1];
    }
    out.pop();
    out
}

/// Everything a run of atomic guards `x ⋈ c` (`c ≤ M_x`) can observe of a
/// valuation given in units of `1/q`: the profile now and at every event
/// and midpoint while time elapses until every clock is past its maximum.
pub fn elapse_trace(v: &[u64], q: u64, max: &[u32]) -> Vec<Vec<u8>> {
    // doubled units so that midpoints stay integral
    let v2: Vec<u64> = v.iter().map(|x| 2 * x).collect();
    let unit = 2 * q;
    let horizon = max.iter().map(|m| (*m as u64 + 2) * unit).max().unwrap_or(0);
    let mut events: BTreeSet<u64> = BTreeSet::new();
    events.insert(0);
    for x in &v2 {
        let mut t = (unit - x % unit) % unit;
        while t <= horizon {
            events.insert(t);
            t += unit;
        }
    }
    let events: Vec<u64> = events.into_iter().collect();
    let mut times = Vec::new();
    for w in events.windows(2) {
        times.push(w[0]);
        times.push((w[0] + w[1]) / 2);
    }
    times.push(*events.last().unwrap());
    let mut trace: Vec<Vec<u8>> = Vec::new();
    for t in times {
        let profile = profile(&v2.iter().map(|x| x + t).collect::<Vec<_>>(), unit, max);
        if trace.last() != Some(&profile) {
            trace.push(profile);
        }
    }
    trace
}

/// Per clock and constant `c ∈ 0..=M_x`: 0 below, 1 equal, 2 above.
fn profile(v2: &[u64], unit: u64, max: &[u32]) -> Vec<u8> {
    let mut out = Vec::new();
    for (x, m) in max.iter().enumerate() {
        for c in 0..=*m as u64 {
            let cc = c * unit;
            out.push(match v2[x].cmp(&cc) {
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Greater => 2,
            });
        }
    }
    out
}

/// A random valuation inside `region`. Fractions are dyadic so that
/// `h + frac` keeps the fraction exactly.
pub fn sample_in_region(r: &mut ChaCha8Rng, region: &Region, max: &[u32]) -> Vec<f64> {
    const DENOM: u32 = 1 << 20;
    let p = region.num_classes();
    let mut fracs: BTreeSet<u32> = BTreeSet::new();
    while fracs.len() < p {
        fracs.insert(r.random_range(1..DENOM));
    }
    let fracs: Vec<f64> = fracs.into_iter().map(|k| k as f64 / DENOM as f64).collect();
    (0..region.num_clocks())
        .map(|x| {
            if region.h()[x] == SATURATED {
                max[x] as f64 + r.random_range(1..3 * DENOM) as f64 / DENOM as f64
            } else if region.rank()[x] == 0 {
                region.h()[x] as f64
            } else {
                region.h()[x] as f64 + fracs[region.rank()[x] as usize - 1]
            }
        })
        .collect()
}

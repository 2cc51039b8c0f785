use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{select_action, LearnerConfig, QTable};
use crate::env::rng_from_seed;
use crate::product::{Experience, Product};

pub const METRICS_HEADER: &str = "episode,global_step,return,episode_time,terminal_reached,epsilon,alpha";

/// One row of the training metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    /// Global step count at the end of the episode.
    pub global_step: u64,
    /// Discounted return `Σ γ^{t_i} r_i` of the episode.
    pub discounted_return: f64,
    /// `Σ (d_i + 1)`.
    pub episode_time: f64,
    pub terminal_reached: bool,
    pub epsilon: f64,
    pub alpha: f64,
}

pub struct TrainOutput<S> {
    pub q: QTable<S>,
    pub metrics: Vec<EpisodeMetrics>,
}

/// Runs episodes until `max_global_steps` decision points have been taken.
/// Each decision updates the table with the realized experience and then
/// with every counterfactual one; α and ε decay after every episode.
pub fn train<P: Product>(p: &P, cfg: &LearnerConfig) -> TrainOutput<P::State> {
    let mut rng = rng_from_seed(cfg.seed);
    let mut q = QTable::new(cfg.q_init);
    let mut metrics = Vec::new();
    let cf = cfg.cf_config();
    let gamma = cfg.gamma;
    let (mut alpha, mut epsilon) = (cfg.alpha0, cfg.epsilon0);
    let mut global_step = 0u64;
    let mut episode = 0u64;
    while global_step < cfg.max_global_steps {
        let mut x = p.initial_state(&mut rng);
        let (mut g, mut discount, mut time) = (0.0, 1.0, 0.0);
        let mut terminal_reached = false;
        let mut steps = 0;
        while steps < cfg.horizon && global_step < cfg.max_global_steps {
            let legal = p.legal_actions(&x);
            let Some(action) = select_action(&q, &x, &legal, epsilon, &mut rng) else {
                g += discount * cfg.no_match_penalty;
                break;
            };
            let env_out = p.env().step(p.env_state(&x), p.env_action(action), &mut rng);
            let out = p.successor(&x, action, env_out.next, env_out.labels);
            let delay = p.delay(action);
            let realized = Experience {
                from: x.clone(),
                action,
                reward: out.reward,
                to: out.next.clone(),
                delay,
                terminal: out.terminal,
                counterfactual: false,
            };
            q.update(&realized, || legal.clone(), alpha, gamma);
            if let Some(cf) = &cf {
                for e in p.counterfactuals(&x, action, env_out.next, env_out.labels, cf) {
                    q.update(&e, || p.legal_actions(&e.from), alpha, gamma);
                }
            }
            g += discount * out.reward;
            discount *= gamma.powf(delay + 1.0);
            time += delay + 1.0;
            global_step += 1;
            steps += 1;
            if out.terminal {
                terminal_reached = !out.no_match;
                break;
            }
            x = out.next;
        }
        metrics.push(EpisodeMetrics {
            episode,
            global_step,
            discounted_return: g,
            episode_time: time,
            terminal_reached,
            epsilon,
            alpha,
        });
        episode += 1;
        alpha = (alpha * cfg.decay).max(cfg.alpha_min);
        epsilon = (epsilon * cfg.decay).max(cfg.epsilon_min);
    }
    TrainOutput { q, metrics }
}

/// Writes the metrics stream as CSV with six-decimal floats.
pub fn write_metrics_csv(rows: &[EpisodeMetrics], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{},{:.6},{:.6}",
            r.episode,
            r.global_step,
            r.discounted_return,
            r.episode_time,
            u8::from(r.terminal_reached),
            r.epsilon,
            r.alpha
        )?;
    }
    Ok(())
}

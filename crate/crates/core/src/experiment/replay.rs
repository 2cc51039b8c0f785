//! Trajectory files: an environment name, an optional seed, and one
//! `delay action` decision per line.
//!
//! ```text
//! env: grid2x2
//! seed: 0
//! 2 up
//! 1 right
//! 0 down
//! ```

use crate::env::{rng_from_seed, Environment, LabelMap, MissingProposition};
use crate::trm::{Decision, Trajectory, Trm};

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryFile {
    pub env: String,
    pub seed: u64,
    /// `(delay, action name or index)`.
    pub steps: Vec<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `env:` header")]
    MissingEnv,
    #[error("step {step}: unknown action `{action}`")]
    UnknownAction { step: usize, action: String },
    #[error(transparent)]
    Labels(#[from] MissingProposition),
}

pub fn parse_trajectory(src: &str) -> Result<TrajectoryFile, TrajectoryError> {
    let mut env = None;
    let mut seed = 0;
    let mut steps = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let syntax = |message: String| TrajectoryError::Syntax { line: i + 1, message };
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("env:") {
            env = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("seed:") {
            seed = rest.trim().parse().map_err(|_| syntax(format!("bad seed `{}`", rest.trim())))?;
        } else {
            let mut parts = line.split_whitespace();
            let (Some(d), Some(a), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(syntax("expected `delay action`".into()));
            };
            let delay: f64 = d.parse().map_err(|_| syntax(format!("bad delay `{d}`")))?;
            if !(delay >= 0.0 && delay.is_finite()) {
                return Err(syntax(format!("delay must be a finite non-negative number, got `{d}`")));
            }
            steps.push((delay, a.to_string()));
        }
    }
    Ok(TrajectoryFile {
        env: env.ok_or(TrajectoryError::MissingEnv)?,
        seed,
        steps,
    })
}

/// Executes the file's actions in `env` from a seeded reset and returns the
/// trajectory the machine reads (labels translated to its propositions).
pub fn simulate(file: &TrajectoryFile, env: &dyn Environment, trm: &Trm) -> Result<Trajectory, TrajectoryError> {
    let labels = LabelMap::new(env, trm)?;
    let mut rng = rng_from_seed(file.seed);
    let mut s = env.reset(&mut rng);
    let mut decisions = Vec::with_capacity(file.steps.len());
    for (step, (delay, action)) in file.steps.iter().enumerate() {
        let a = env
            .action_index(action)
            .or_else(|| action.parse().ok().filter(|a| *a < env.num_actions()))
            .ok_or_else(|| TrajectoryError::UnknownAction {
                step,
                action: action.clone(),
            })?;
        let out = env.step(s, a, &mut rng);
        decisions.push(Decision {
            delay: *delay,
            label: labels.translate(out.labels),
            env_state: Some(env.state_name(s)),
        });
        s = out.next;
    }
    Ok(Trajectory { decisions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::env::Grid2x2;
    use crate::trm::Semantics;

    const ZETA1: &str = "env: grid2x2\n2 up\n1 right\n0 down\n";

    #[test]
    fn zeta1_digital_return() {
        let f = parse_trajectory(ZETA1).unwrap();
        let trm = bundled::load("fig3");
        let t = simulate(&f, &Grid2x2, &trm).unwrap();
        let g = trm.discounted_return(&t, 0.9, Semantics::Digital).unwrap();
        // 5 − 2(1 + 0.9) − 0.9³ + 10·0.9⁵
        assert!((g - (5.0 - 2.0 * 1.9 - 0.729 + 10.0 * 0.59049)).abs() < 1e-12);
    }

    #[test]
    fn errors_are_reported() {
        assert_eq!(parse_trajectory("1 up\n"), Err(TrajectoryError::MissingEnv));
        assert!(matches!(parse_trajectory("env: x\n1\n"), Err(TrajectoryError::Syntax { line: 2, .. })));
        assert!(matches!(parse_trajectory("env: x\n-1 up\n"), Err(TrajectoryError::Syntax { .. })));
        let f = parse_trajectory("env: grid2x2\n0 jump\n").unwrap();
        let trm = bundled::load("fig3");
        assert!(matches!(simulate(&f, &Grid2x2, &trm), Err(TrajectoryError::UnknownAction { step: 0, .. })));
    }

    #[test]
    fn numeric_actions_and_comments() {
        let f = parse_trajectory("# zeta 1\nenv: grid2x2\nseed: 4\n2 0 # up\n").unwrap();
        assert_eq!(f.seed, 4);
        let trm = bundled::load("fig3");
        let t = simulate(&f, &Grid2x2, &trm).unwrap();
        assert_eq!(t.decisions.len(), 1);
        assert_eq!(t.decisions[0].label, crate::trm::PropSet::singleton(trm.prop_id("p").unwrap()));
    }
}

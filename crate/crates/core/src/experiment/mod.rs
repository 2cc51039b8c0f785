//! Multi-seed experiments: training runs dispatched over a worker pool,
//! per-seed and aggregate CSVs, a resolved configuration snapshot, and
//! comparisons between variants.

pub mod replay;
pub mod stats;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bundled;
use crate::env::{self, Environment};
use crate::learner::{evaluate, train, write_metrics_csv, ConfigError, EpisodeMetrics, EvalSummary, LearnerConfig};
use crate::product::{AnyProduct, Product};
use crate::trm::{parse_trm, Trm};

/// Episodes per aggregate bucket.
pub const BUCKET: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Learner(#[from] ConfigError),
    #[error("cannot load machine `{name}`: {message}")]
    Trm { name: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything needed to reproduce a multi-seed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub env: String,
    /// Bundled machine id or path to a `.trm` file.
    pub trm: String,
    /// FrozenLake map file.
    pub map: Option<PathBuf>,
    /// Number of seeds; seed `i` trains with `learner.seed + i`.
    pub seeds: u32,
    pub eval_episodes: usize,
    /// Training episodes at the end of each run summarised as "final".
    pub final_window: usize,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub learner: LearnerConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            env: "grid2x2".into(),
            trm: "fig3".into(),
            map: None,
            seeds: 1,
            eval_episodes: 10,
            final_window: BUCKET,
            jobs: 0,
            learner: LearnerConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.learner.validate()?;
        if self.final_window == 0 {
            return Err(ExperimentError::Config("final_window must be at least 1".into()));
        }
        Ok(())
    }

    /// Short name for tables: interpretation plus counterfactual flag.
    pub fn variant(&self) -> String {
        let ci = if self.learner.counterfactuals { "+ci" } else { "" };
        format!("{}{ci}", self.learner.interpretation.label())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.learner.seed + i).collect()
    }

    pub fn load_trm(&self) -> Result<Trm, ExperimentError> {
        load_trm(&self.trm)
    }

    pub fn load_env(&self) -> Result<Arc<dyn Environment>, ExperimentError> {
        let map = match &self.map {
            Some(p) => Some(fs::read_to_string(p).map_err(io_err(p))?),
            None => None,
        };
        env::by_name(&self.env, map.as_deref())
            .map(Arc::from)
            .map_err(ExperimentError::Config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    pub fn from_toml(src: &str) -> Result<ExperimentSpec, ExperimentError> {
        toml::from_str(src).map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

/// Loads a bundled machine by id or a machine file by path.
pub fn load_trm(name: &str) -> Result<Trm, ExperimentError> {
    let src = match bundled::source(name) {
        Some(s) => s.to_string(),
        None => fs::read_to_string(name).map_err(|e| ExperimentError::Trm {
            name: name.into(),
            message: format!("not a bundled machine ({}) and unreadable: {e}", bundled::NAMES.join(", ")),
        })?,
    };
    parse_trm(&src).map_err(|e| ExperimentError::Trm {
        name: name.into(),
        message: e.to_string(),
    })
}

/// Outcome of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    #[serde(skip)]
    pub metrics: Vec<EpisodeMetrics>,
    pub episodes: usize,
    /// Mean training return over the last `final_window` episodes.
    pub final_return: f64,
    pub final_episode_time: f64,
    pub final_success_rate: f64,
    /// Mean episode time over every training episode.
    pub mean_episode_time: f64,
    pub greedy: EvalSummary,
    pub q_entries: usize,
}

fn finish<P: Product>(p: &P, spec: &ExperimentSpec, cfg: &LearnerConfig) -> SeedResult {
    let out = train(p, cfg);
    let greedy = evaluate(p, &out.q, cfg.horizon, spec.eval_episodes, cfg.seed ^ 0x5eed_0000_0000);
    let tail = &out.metrics[out.metrics.len().saturating_sub(spec.final_window)..];
    let returns: Vec<f64> = tail.iter().map(|m| m.discounted_return).collect();
    let times: Vec<f64> = tail.iter().map(|m| m.episode_time).collect();
    let successes: Vec<f64> = tail.iter().map(|m| f64::from(u8::from(m.terminal_reached))).collect();
    SeedResult {
        seed: cfg.seed,
        episodes: out.metrics.len(),
        final_return: stats::mean(&returns),
        final_episode_time: stats::mean(&times),
        final_success_rate: stats::mean(&successes),
        mean_episode_time: stats::mean(&out.metrics.iter().map(|m| m.episode_time).collect::<Vec<_>>()),
        greedy,
        q_entries: out.q.num_entries(),
        metrics: out.metrics,
    }
}

/// Trains and evaluates a single seed.
pub fn run_seed(spec: &ExperimentSpec, seed: u64) -> Result<SeedResult, ExperimentError> {
    let env = spec.load_env()?;
    let trm = Arc::new(spec.load_trm()?);
    let cfg = LearnerConfig {
        seed,
        ..spec.learner.clone()
    };
    let product = AnyProduct::new(env, trm, cfg.interpretation, cfg.product_config())
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(match &product {
        AnyProduct::Digital(p) => finish(p, spec, &cfg),
        AnyProduct::Corner(p) => finish(p, spec, &cfg),
    })
}

/// One row of the aggregate CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: usize,
    pub first_episode: usize,
    pub seeds: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_episode_time: f64,
    pub std_episode_time: f64,
    pub mean_global_step: f64,
}

pub const AGGREGATE_HEADER: &str =
    "bucket,first_episode,seeds,mean_return,std_return,mean_episode_time,std_episode_time,mean_global_step";

fn rounded(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

/// Per-bucket statistics across seeds. Each seed contributes the mean of
/// its episodes in the bucket, computed from the six-decimal values written
/// to its CSV so the aggregate can be recomputed from the files.
pub fn aggregate(runs: &[Vec<EpisodeMetrics>]) -> Vec<BucketRow> {
    let longest = runs.iter().map(Vec::len).max().unwrap_or(0);
    let mut rows = Vec::new();
    for (bucket, first) in (0..longest).step_by(BUCKET).enumerate() {
        let (mut g, mut t, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for run in runs {
            let end = run.len().min(first + BUCKET);
            if first >= end {
                continue;
            }
            let slice = &run[first..end];
            let avg = |f: &dyn Fn(&EpisodeMetrics) -> f64| slice.iter().map(f).sum::<f64>() / slice.len() as f64;
            g.push(avg(&|m| rounded(m.discounted_return)));
            t.push(avg(&|m| rounded(m.episode_time)));
            s.push(avg(&|m| m.global_step as f64));
        }
        rows.push(BucketRow {
            bucket,
            first_episode: first,
            seeds: g.len(),
            mean_return: stats::mean(&g),
            std_return: stats::std_dev(&g),
            mean_episode_time: stats::mean(&t),
            std_episode_time: stats::std_dev(&t),
            mean_global_step: stats::mean(&s),
        });
    }
    rows
}

/// Full-precision aggregate CSV.
pub fn aggregate_csv(rows: &[BucketRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:?},{:?},{:?},{:?},{:?}",
            r.bucket,
            r.first_episode,
            r.seeds,
            r.mean_return,
            r.std_return,
            r.mean_episode_time,
            r.std_episode_time,
            r.mean_global_step
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: String,
    pub env: String,
    pub trm: String,
    pub seeds: Vec<u64>,
    pub final_return_mean: f64,
    pub final_return_std: f64,
    pub final_episode_time_mean: f64,
    pub episode_time_mean: f64,
    pub greedy_return_mean: f64,
    pub greedy_success_rate: f64,
    pub per_seed: Vec<SeedResult>,
}

pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub runs: Vec<SeedResult>,
    pub aggregate: Vec<BucketRow>,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn final_returns(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_return).collect()
    }

    /// Per-seed mean episode time over the whole run.
    pub fn episode_times(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.mean_episode_time).collect()
    }
}

/// Runs every seed of `spec` on a bounded pool; results are ordered by
/// seed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    // fail early on unloadable inputs
    spec.load_env()?;
    spec.load_trm()?;
    let seeds = spec.seed_list();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let runs: Vec<SeedResult> = pool.install(|| {
        use rayon::prelude::*;
        seeds.par_iter().map(|s| run_seed(spec, *s)).collect::<Result<_, _>>()
    })?;
    let metrics: Vec<Vec<EpisodeMetrics>> = runs.iter().map(|r| r.metrics.clone()).collect();
    let finals: Vec<f64> = runs.iter().map(|r| r.final_return).collect();
    let times: Vec<f64> = runs.iter().map(|r| r.final_episode_time).collect();
    let greedy: Vec<f64> = runs.iter().map(|r| r.greedy.mean_return).collect();
    let success: Vec<f64> = runs.iter().map(|r| r.greedy.success_rate).collect();
    let summary = Summary {
        variant: spec.variant(),
        env: spec.env.clone(),
        trm: spec.trm.clone(),
        seeds,
        final_return_mean: stats::mean(&finals),
        final_return_std: stats::std_dev(&finals),
        final_episode_time_mean: stats::mean(&times),
        episode_time_mean: stats::mean(&runs.iter().map(|r| r.mean_episode_time).collect::<Vec<_>>()),
        greedy_return_mean: stats::mean(&greedy),
        greedy_success_rate: stats::mean(&success),
        per_seed: runs.clone(),
    };
    Ok(ExperimentResult {
        spec: spec.clone(),
        aggregate: aggregate(&metrics),
        runs,
        summary,
    })
}

/// Writes `seed_<n>.csv`, `aggregate.csv`, `config.toml` and
/// `summary.json` into `dir`.
pub fn write_artifacts(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for run in &result.runs {
        let path = dir.join(format!("seed_{}.csv", run.seed));
        let mut buf = Vec::new();
        write_metrics_csv(&run.metrics, &mut buf).expect("writing to memory");
        fs::write(&path, buf).map_err(io_err(&path))?;
        written.push(path);
    }
    let files = [
        ("aggregate.csv", aggregate_csv(&result.aggregate)),
        ("config.toml", result.spec.to_toml()),
        (
            "summary.json",
            serde_json::to_string_pretty(&result.summary).expect("summary serialises") + "\n",
        ),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// One line of a comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub final_return_mean: f64,
    pub final_return_std: f64,
    pub episode_time_mean: f64,
    pub greedy_return_mean: f64,
}

/// Runs several variants of one environment/machine pair.
pub fn compare(specs: &[ExperimentSpec]) -> Result<Vec<ExperimentResult>, ExperimentError> {
    if let Some(first) = specs.first() {
        if let Some(bad) = specs.iter().find(|s| s.env != first.env || s.trm != first.trm || s.map != first.map) {
            return Err(ExperimentError::Config(format!(
                "compared specs must share environment and machine: {}/{} vs {}/{}",
                first.env, first.trm, bad.env, bad.trm
            )));
        }
    }
    specs.iter().map(run_experiment).collect()
}

pub fn comparison_rows(results: &[ExperimentResult]) -> Vec<ComparisonRow> {
    results
        .iter()
        .map(|r| ComparisonRow {
            variant: r.summary.variant.clone(),
            final_return_mean: r.summary.final_return_mean,
            final_return_std: r.summary.final_return_std,
            episode_time_mean: r.summary.episode_time_mean,
            greedy_return_mean: r.summary.greedy_return_mean,
        })
        .collect()
}

/// Plain-text table of a comparison.
pub fn render_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<24} {:>14} {:>12} {:>14} {:>14}\n",
        "variant", "final return", "std", "episode time", "greedy return"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<24} {:>14.4} {:>12.4} {:>14.2} {:>14.4}",
            r.variant, r.final_return_mean, r.final_return_std, r.episode_time_mean, r.greedy_return_mean
        );
    }
    out
}

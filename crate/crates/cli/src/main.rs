use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use timed_rm::bundled;
use timed_rm::env;
use timed_rm::experiment::replay::{parse_trajectory, simulate};
use timed_rm::experiment::{
    self, comparison_rows, render_comparison, write_artifacts, ExperimentError, ExperimentResult, ExperimentSpec,
};
use timed_rm::product::Interpretation;
use timed_rm::regions::RegionSpace;
use timed_rm::trm::{audit_completeness, parse_trm_report, Semantics, TrmError};

#[derive(Parser)]
#[command(name = "trm-lab", version, about = "Learning with timed reward machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train over several seeds and write per-seed and aggregate CSVs.
    Train(RunArgs),
    /// Train, then report greedy-policy statistics per seed.
    Eval(RunArgs),
    /// Discounted return of a trajectory file.
    Return(ReturnArgs),
    /// Train several variants of one environment/machine pair side by side.
    Compare(RunArgs),
    /// Parse and audit a machine.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args, Clone, Debug, Default)]
struct RunArgs {
    /// TOML experiment spec; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    /// Bundled machine id or machine file.
    #[arg(long)]
    trm: Option<String>,
    /// digital, discretized, corner or reward-machine (comma-separated for compare).
    #[arg(long, value_delimiter = ',')]
    interp: Vec<String>,
    #[arg(long)]
    kappa: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seeds: Option<u32>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Counterfactual imagining (comma-separated for compare).
    #[arg(long, value_enum, value_delimiter = ',')]
    ci: Vec<Toggle>,
    #[arg(long)]
    rcrm: Option<u32>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReturnArgs {
    trajectory: PathBuf,
    #[arg(long)]
    trm: String,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value = "digital")]
    semantics: String,
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    trm: String,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    NoMatch(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Return(a) => cmd_return(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Validate(a) => cmd_validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::NoMatch(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn parse_interp(name: &str, kappa: Option<u32>) -> Result<Interpretation, Failure> {
    let mut i = Interpretation::from_str(name).map_err(Failure::Config)?;
    if let (Interpretation::Discretized { kappa: k }, Some(flag)) = (&mut i, kappa) {
        if !name.contains(':') {
            *k = flag;
        }
    }
    Ok(i)
}

/// Defaults, then the config file, then flags. `interp`/`ci` index into
/// the flag lists for compare variants.
fn resolve(a: &RunArgs, interp: Option<&str>, ci: Option<Toggle>) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &a.config {
        Some(p) => {
            let src = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            ExperimentSpec::from_toml(&src)?
        }
        None => ExperimentSpec::default(),
    };
    let l = &mut spec.learner;
    if let Some(name) = interp {
        l.interpretation = parse_interp(name, a.kappa)?;
    } else if let (Interpretation::Discretized { kappa }, Some(k)) = (&mut l.interpretation, a.kappa) {
        *kappa = k;
    }
    if let Some(t) = ci {
        l.counterfactuals = t == Toggle::On;
    }
    macro_rules! set {
        ($($flag:ident => $field:expr),* $(,)?) => {
            $(if let Some(v) = a.$flag.clone() { $field = v; })*
        };
    }
    set!(
        gamma => l.gamma,
        steps => l.max_global_steps,
        seed => l.seed,
        rcrm => l.r_crm,
        topk => l.top_k,
        horizon => l.horizon,
        penalty => l.no_match_penalty,
    );
    set!(env => spec.env, trm => spec.trm, seeds => spec.seeds, jobs => spec.jobs);
    if let Some(m) = &a.map {
        spec.map = Some(m.clone());
    }
    spec.validate()?;
    Ok(spec)
}

fn single(a: &RunArgs) -> Result<ExperimentSpec, Failure> {
    if a.interp.len() > 1 || a.ci.len() > 1 {
        return Err(Failure::Config("several --interp/--ci values are only accepted by compare".into()));
    }
    resolve(a, a.interp.first().map(String::as_str), a.ci.first().copied())
}

fn out_dir(a: &RunArgs, spec: &ExperimentSpec) -> PathBuf {
    a.out.clone().unwrap_or_else(|| {
        let trm = Path::new(&spec.trm).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        PathBuf::from("runs").join(format!("{}-{}-{}", spec.env, trm, spec.variant()))
    })
}

fn print_summary(r: &ExperimentResult) {
    let s = &r.summary;
    println!(
        "{} on {} x {}: {} seeds, final return {:.4} ± {:.4}, mean episode time {:.2}, greedy return {:.4}, greedy success {:.2}",
        s.variant,
        s.env,
        s.trm,
        s.seeds.len(),
        s.final_return_mean,
        s.final_return_std,
        s.episode_time_mean,
        s.greedy_return_mean,
        s.greedy_success_rate
    );
}

fn cmd_train(a: &RunArgs) -> Result<(), Failure> {
    let spec = single(a)?;
    let result = experiment::run_experiment(&spec)?;
    let dir = out_dir(a, &spec);
    write_artifacts(&result, &dir)?;
    print_summary(&result);
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_eval(a: &RunArgs) -> Result<(), Failure> {
    let spec = single(a)?;
    let result = experiment::run_experiment(&spec)?;
    println!("{:>6} {:>12} {:>10} {:>10} {:>10}", "seed", "mean G", "std G", "time", "success");
    for r in &result.runs {
        let g = &r.greedy;
        println!(
            "{:>6} {:>12.4} {:>10.4} {:>10.2} {:>10.2}",
            r.seed, g.mean_return, g.std_return, g.mean_time, g.success_rate
        );
    }
    print_summary(&result);
    if let Some(dir) = &a.out {
        write_artifacts(&result, dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_compare(a: &RunArgs) -> Result<(), Failure> {
    let interps: Vec<Option<&str>> = if a.interp.is_empty() {
        vec![None]
    } else {
        a.interp.iter().map(|s| Some(s.as_str())).collect()
    };
    let cis: Vec<Option<Toggle>> = if a.ci.is_empty() {
        vec![None]
    } else {
        a.ci.iter().map(|t| Some(*t)).collect()
    };
    let mut specs = Vec::new();
    for i in &interps {
        for c in &cis {
            specs.push(resolve(a, *i, *c)?);
        }
    }
    let results = experiment::compare(&specs)?;
    let rows = comparison_rows(&results);
    print!("{}", render_comparison(&rows));
    if let Some(dir) = &a.out {
        for r in &results {
            write_artifacts(r, &dir.join(r.summary.variant.replace('+', "-")))?;
        }
        let mut csv = String::from("variant,final_return_mean,final_return_std,episode_time_mean,greedy_return_mean\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                r.variant, r.final_return_mean, r.final_return_std, r.episode_time_mean, r.greedy_return_mean
            ));
        }
        let path = dir.join("comparison.csv");
        fs::write(&path, csv).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn machine_source(name: &str) -> Result<String, Failure> {
    match bundled::source(name) {
        Some(s) => Ok(s.to_string()),
        None => fs::read_to_string(name).map_err(|e| Failure::Config(format!("{name}: {e}"))),
    }
}

fn cmd_return(a: &ReturnArgs) -> Result<(), Failure> {
    let semantics = Semantics::from_str(&a.semantics).map_err(Failure::Config)?;
    let trm = experiment::load_trm(&a.trm)?;
    let src = fs::read_to_string(&a.trajectory).map_err(|e| Failure::Config(format!("{}: {e}", a.trajectory.display())))?;
    let file = parse_trajectory(&src).map_err(|e| Failure::Config(e.to_string()))?;
    let map = match &a.map {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let environment = env::by_name(&file.env, map.as_deref()).map_err(Failure::Config)?;
    let trajectory = simulate(&file, environment.as_ref(), &trm).map_err(|e| Failure::Config(e.to_string()))?;
    let semantic = |e: TrmError| match e {
        TrmError::NoMatch { step } => Failure::NoMatch(format!("no transition fires at step {step}")),
        other => Failure::Config(other.to_string()),
    };
    let g = trm.discounted_return(&trajectory, a.gamma, semantics).map_err(semantic)?;
    let run = trm.run(&trajectory.timed_word()).map_err(semantic)?;
    let mut t = 0.0;
    for (i, (step, d)) in run.steps.iter().zip(&trajectory.decisions).enumerate() {
        let tr = trm.transition(step.transition);
        // `+ 0.0` keeps a zero accrual from printing as -0.0000
        let accrued = timed_rm::trm::accrual_factor(d.delay, a.gamma, semantics) * step.state_rate + 0.0;
        println!(
            "{i}: t={t} {} {} --{}--> {} {} reward {:.4} + {:.4}",
            trm.state_name(step.source),
            step.source_valuation,
            tr.name,
            trm.state_name(step.target),
            step.target_valuation,
            accrued,
            step.transition_reward
        );
        t += d.delay + 1.0;
    }
    println!("G = {g:.4}");
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    let src = machine_source(&a.trm)?;
    let parsed = parse_trm_report(&src).map_err(|e| Failure::Config(format!("{}: {e}", a.trm)))?;
    let trm = &parsed.trm;
    println!(
        "{}: ok, {} states, {} transitions, {} clocks",
        a.trm,
        trm.num_states(),
        trm.transitions().len(),
        trm.num_clocks()
    );
    for w in &parsed.warnings {
        println!("warning: {w}");
    }
    let consts = trm.max_constants();
    for (c, m) in consts.per_clock.iter().enumerate() {
        println!("M_{} = {m}", trm.clocks()[c]);
    }
    println!("M_d = {}", consts.delay);
    let bound = region_bound(&consts.per_clock);
    if bound <= 1e6 {
        let n = RegionSpace::new(consts.per_clock.clone()).enumerate().len();
        println!("regions: {n}");
    } else {
        println!("regions: at most {bound:.3e}");
    }
    let gaps = audit_completeness(trm);
    if gaps.is_empty() {
        println!("complete");
    } else {
        println!("incomplete: {} gaps", gaps.len());
        for g in gaps.iter().take(10) {
            println!(
                "  {} on {} at {:?}",
                trm.state_name(g.state),
                g.label.render(trm.props()),
                g.valuation
            );
        }
    }
    Ok(())
}

/// `n!·2ⁿ·Π(2M_x + 2)`.
fn region_bound(max: &[u32]) -> f64 {
    let n = max.len();
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    fact * 2f64.powi(n as i32) * max.iter().map(|m| 2.0 * *m as f64 + 2.0).product::<f64>()
}

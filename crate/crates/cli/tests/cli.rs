use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use timed_rm::bundled;
use timed_rm::env::{rng_from_seed, Grid2x2};
use timed_rm::learner::{greedy_rollout, train, LearnerConfig};
use timed_rm::product::{DigitalProduct, Interpretation, Product, ProductConfig};

fn trm_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trm-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn asset(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel).to_string_lossy().into_owned()
}

fn g_line(o: &Output) -> f64 {
    let out = stdout(o);
    let line = out.lines().last().expect("output");
    line.strip_prefix("G = ").expect("final G line").parse().unwrap()
}

#[test]
fn return_prints_run_and_total() {
    let o = trm_lab(&["return", &asset("assets/trajectories/zeta1.traj"), "--trm", "fig3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.ends_with("G = 6.3759\n"), "{out}");
    assert!(out.contains("--theta1--> u1") && out.contains("--theta3--> u2"));
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn return_matches_closed_forms() {
    let (g, ln) = (0.9f64, -(0.9f64.ln()));
    let integral = |d: f64| (1.0 - g.powf(d)) / ln;
    let cases = [
        ("zeta1.traj", "real-time", 5.0 - 2.0 * integral(2.0) + g.powi(3) * -integral(1.0) + 10.0 * g.powi(5)),
        ("zeta2.traj", "digital", 5.0 - 2.0 * (1.0 + g) + g.powi(4) * (10.0 - 4.0)),
        ("zeta2.traj", "real-time", 5.0 - 2.0 * integral(2.0) + g.powi(4) * (10.0 - 4.0 * integral(1.0))),
        ("fig6_realtime.traj", "real-time", 5.0 - integral(0.1) + 7.0 * g.powf(1.1)),
    ];
    for (file, sem, want) in cases {
        let trm = if file.starts_with("fig6") { "fig6" } else { "fig3" };
        let path = asset(&format!("assets/trajectories/{file}"));
        let o = trm_lab(&["return", &path, "--trm", trm, "--semantics", sem]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!((g_line(&o) - want).abs() < 5e-5, "{file} {sem}: {} vs {want}", g_line(&o));
    }
}

#[test]
fn empty_trajectory_returns_zero() {
    let o = trm_lab(&["return", &asset("tests/fixtures/empty.traj"), "--trm", "fig3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "G = 0.0000\n");
}

#[test]
fn no_match_exits_with_two() {
    let o = trm_lab(&["return", &asset("tests/fixtures/too_early.traj"), "--trm", "fig3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("step 0"));
}

#[test]
fn configuration_errors_exit_with_one() {
    for args in [
        vec!["train", "--bogus"],
        vec!["train", "--env", "mars", "--steps", "1"],
        vec!["train", "--interp", "sundial", "--steps", "1"],
        vec!["train", "--interp", "digital,corner", "--steps", "1"],
        vec!["train", "--gamma", "1.5", "--steps", "1"],
        vec!["return", "/definitely/missing.traj", "--trm", "fig3"],
        vec!["validate", "/definitely/missing.trm"],
    ] {
        let o = trm_lab(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    assert_eq!(trm_lab(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_reports_constants() {
    let o = trm_lab(&["validate", "trm1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("M_x = 15") && out.contains("M_d = 10"), "{out}");
    let out = stdout(&trm_lab(&["validate", "trm2"]));
    assert!(out.contains("M_x = 15") && out.contains("M_y = 1"), "{out}");
    let out = stdout(&trm_lab(&["validate", "fig6"]));
    assert!(out.contains("regions: 38") && out.contains("complete"), "{out}");
}

#[test]
fn validate_names_both_overlapping_transitions() {
    let o = trm_lab(&["validate", &asset("tests/fixtures/overlap.trm")]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("low") && err.contains("high"), "{err}");
}

#[test]
fn zero_steps_writes_header_only_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = trm_lab(&["train", "--steps", "0", "--seeds", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["seed_0.csv", "seed_1.csv", "aggregate.csv"] {
        assert_eq!(fs::read_to_string(out.join(name)).unwrap().lines().count(), 1, "{name}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = trm_lab(&[
        "train",
        "--config",
        &asset("tests/fixtures/small.toml"),
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let snapshot = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(snapshot.contains("gamma = 0.95"), "{snapshot}");
    assert!(snapshot.contains("max_global_steps = 500"));
    assert!(snapshot.contains("seed = 9"));
    assert!(out.join("seed_9.csv").exists());
}

fn parse_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn aggregate_is_the_mean_of_seed_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = trm_lab(&["train", "--steps", "3000", "--seeds", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let seeds: Vec<_> = (0..3).map(|s| parse_csv(&out.join(format!("seed_{s}.csv")))).collect();
    let aggregate = parse_csv(&out.join("aggregate.csv"));
    assert!(!aggregate.is_empty());
    for row in &aggregate {
        let first = row[1] as usize;
        let per_seed: Vec<(f64, f64)> = seeds
            .iter()
            .filter(|s| s.len() > first)
            .map(|s| {
                let slice = &s[first..s.len().min(first + 100)];
                let n = slice.len() as f64;
                (slice.iter().map(|r| r[2]).sum::<f64>() / n, slice.iter().map(|r| r[3]).sum::<f64>() / n)
            })
            .collect();
        assert_eq!(row[2] as usize, per_seed.len());
        let n = per_seed.len() as f64;
        let mean_g = per_seed.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_t = per_seed.iter().map(|p| p.1).sum::<f64>() / n;
        assert!((row[3] - mean_g).abs() < 1e-9, "{} vs {mean_g}", row[3]);
        assert!((row[5] - mean_t).abs() < 1e-9, "{} vs {mean_t}", row[5]);
    }
}

#[test]
fn compare_writes_one_directory_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let o = trm_lab(&[
        "compare",
        "--env",
        "line3",
        "--trm",
        "fig6",
        "--interp",
        "digital,corner",
        "--ci",
        "on,off",
        "--steps",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 5, "{table}");
    for v in ["digital-ci", "digital", "corner-ci", "corner"] {
        assert!(out.join(v).join("aggregate.csv").exists(), "{v}");
    }
    let single = trm_lab(&["compare", "--env", "line3", "--trm", "fig6", "--steps", "500"]);
    assert!(single.status.success());
    assert!(stdout(&single).contains("digital+ci"));
}

#[test]
fn return_agrees_with_greedy_rollouts() {
    let config = ProductConfig {
        gamma: 0.9,
        no_match_penalty: 0.0,
    };
    let p = DigitalProduct::new(Arc::new(Grid2x2), Arc::new(bundled::load("fig3")), Interpretation::Digital, config).unwrap();
    let cfg = LearnerConfig {
        gamma: 0.9,
        max_global_steps: 20_000,
        ..Default::default()
    };
    let q = train(&p, &cfg).q;
    let rollout = greedy_rollout(&p, &q, 50, &mut rng_from_seed(1));
    assert!(rollout.terminal_reached);
    let mut src = String::from("env: grid2x2\n");
    for s in &rollout.steps {
        src.push_str(&format!("{} {}\n", s.delay, p.env().action_name(p.env_action(s.action))));
    }
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("greedy.traj");
    fs::write(&path, src).unwrap();
    let o = trm_lab(&["return", path.to_str().unwrap(), "--trm", "fig3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // printed to four decimals
    assert!((g_line(&o) - rollout.discounted_return).abs() < 5e-5);
}

//! The `concaveq` binary end to end: run directories, exit codes, evaluation,
//! gradient checks and the theory lab.

use concaveq::harness::{run_gradcheck, GradcheckOptions, LabConfig, RunConfig};
use concaveq::learner::GROUPS;
use concaveq::nets::Checkpoint;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const SMOKE: &str = r#"
seed = 0
out_dir = "unused"

[env]
kind = "matrix"

[train]
total_steps = 300
batch = 32
buffer_capacity = 256
eval_interval_steps = 100
eval_episodes = 4
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concaveq"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", s(config), "--out", s(out)];
    args.extend_from_slice(extra);
    bin(&args)
}

#[test]
fn train_writes_a_complete_reproducible_run_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "smoke.toml", SMOKE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = train(&cfg, out, &["--seed", "5"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in [
        "config.toml",
        "metrics.jsonl",
        "final_eval.json",
        "checkpoints/final.ckpt",
    ] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    assert_eq!(
        fs::read(a.join("metrics.jsonl")).unwrap(),
        fs::read(b.join("metrics.jsonl")).unwrap()
    );
    // checkpoints differ only in the embedded config, which names the run directory
    let load = |d: &Path| {
        Checkpoint::load(d.join("checkpoints/final.ckpt"))
            .unwrap()
            .sections
    };
    assert_eq!(load(&a), load(&b));

    // the snapshot carries the command-line overrides and reparses
    let snap = RunConfig::load(a.join("config.toml")).unwrap();
    assert_eq!(snap.seed, 5);
    assert_eq!(snap.train.total_steps, 300);
    assert_eq!(RunConfig::parse(&snap.to_toml().unwrap()).unwrap(), snap);

    let metrics = fs::read_to_string(a.join("metrics.jsonl")).unwrap();
    for kind in ["episode", "train", "eval"] {
        assert!(
            metrics.contains(&format!("\"kind\":\"{kind}\"")),
            "no {kind} records"
        );
    }
    let c = train(&cfg, &tmp.path().join("c"), &["--seed", "6"]);
    assert_eq!(code(&c), 0);
    assert_ne!(
        fs::read(a.join("metrics.jsonl")).unwrap(),
        fs::read(tmp.path().join("c/metrics.jsonl")).unwrap()
    );
}

#[test]
fn ablation_flags_reach_the_snapshot() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "smoke.toml", SMOKE);
    let out = tmp.path().join("run");
    let o = train(
        &cfg,
        &out,
        &[
            "--mixer",
            "monotonic",
            "--no-iter",
            "--no-policy",
            "--no-qstar",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let snap = RunConfig::load(out.join("config.toml")).unwrap();
    assert!(
        !snap.ablation.iter_selection && !snap.ablation.soft_policy && !snap.ablation.central_qstar
    );
    assert_eq!(format!("{:?}", snap.ablation.mixer), "Monotonic");
}

#[test]
fn config_errors_exit_two_and_name_the_line() {
    let tmp = TempDir::new().unwrap();
    let bad = write(
        tmp.path(),
        "bad.toml",
        &SMOKE.replace("batch = 32", "batch = 0"),
    );
    let o = train(&bad, &tmp.path().join("x"), &[]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("line 10: train.batch"),
        "{}",
        stderr(&o)
    );

    let unknown = write(
        tmp.path(),
        "unknown.toml",
        &SMOKE.replace("batch = 32", "batch = 32\nbatsh = 4"),
    );
    let o = train(&unknown, &tmp.path().join("y"), &[]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("line 11") && stderr(&o).contains("batsh"),
        "{}",
        stderr(&o)
    );

    let lab = write(
        tmp.path(),
        "lab.toml",
        "n = [30]\nstates = 2\nactions = [8]\n",
    );
    let o = bin(&["lab", s(&lab), "--out", s(&tmp.path().join("lab"))]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn non_finite_loss_exits_three_with_a_diagnostic() {
    let tmp = TempDir::new().unwrap();
    let text = SMOKE.replace(
        "kind = \"matrix\"",
        "kind = \"matrix\"\npayoff = [[1e308, -1e308], [-1e308, 1e308]]",
    );
    let cfg = write(tmp.path(), "nan.toml", &text);
    let out = tmp.path().join("run");
    let o = train(&cfg, &out, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let metrics = fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    let last = metrics.lines().last().unwrap();
    assert!(last.contains("\"kind\":\"diagnostic\""), "{last}");
}

#[test]
fn checkpoint_version_and_missing_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "smoke.toml", SMOKE);
    let out = tmp.path().join("run");
    assert_eq!(code(&train(&cfg, &out, &[])), 0);
    let ck = out.join("checkpoints/final.ckpt");

    let mut bytes = fs::read(&ck).unwrap();
    bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
    let future = write(tmp.path(), "future.ckpt", "");
    fs::write(&future, bytes).unwrap();
    assert_eq!(code(&bin(&["eval", s(&future)])), 4);

    assert_eq!(code(&bin(&["eval", s(&tmp.path().join("nope.ckpt"))])), 1);
}

#[test]
fn evaluation_is_deterministic_given_a_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "smoke.toml", SMOKE);
    let out = tmp.path().join("run");
    assert_eq!(code(&train(&cfg, &out, &[])), 0);
    let ck = out.join("checkpoints/final.ckpt");
    let run = |seed: &str| bin(&["eval", s(&ck), "--episodes", "6", "--seed", seed]).stdout;
    assert_eq!(run("3"), run("3"));
    let summary: serde_json::Value = serde_json::from_slice(&run("3")).unwrap();
    assert_eq!(summary["episodes"], 6);
    assert!(summary["optimal_rate"].as_f64().is_some());
}

#[test]
fn matrix_fixture_reports_the_optimal_rate() {
    let tmp = TempDir::new().unwrap();
    let text = SMOKE
        .replace("total_steps = 300", "total_steps = 5000")
        .replace("eval_episodes = 4", "eval_episodes = 16");
    let cfg = write(tmp.path(), "matrix.toml", &text);
    let out = tmp.path().join("run");
    let o = train(&cfg, &out, &["--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("final_eval.json")).unwrap()).unwrap();
    let rate = eval["optimal_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    let payoff = [[8.0, -12.0, -12.0], [-12.0, 0.0, 0.0], [-12.0, 0.0, 0.0]];
    let actions = eval["first_actions"].as_array().unwrap();
    assert_eq!(actions.len(), 16);
    let lookup: f64 = actions
        .iter()
        .map(|u| payoff[u[0].as_u64().unwrap() as usize][u[1].as_u64().unwrap() as usize])
        .sum::<f64>()
        / 16.0;
    assert_eq!(eval["mean_return"].as_f64().unwrap(), lookup);
    if rate == 1.0 {
        assert_eq!(lookup, 8.0);
    }
}

#[test]
fn untrained_predator_prey_without_penalty_never_loses_reward() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
[env]
kind = "predator_prey"
penalty = 0.0

[train]
total_steps = 1
batch = 1
buffer_capacity = 400
eval_episodes = 2
"#;
    let cfg = write(tmp.path(), "pp.toml", text);
    let out = tmp.path().join("run");
    let o = train(&cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = bin(&[
        "eval",
        s(&out.join("checkpoints/final.ckpt")),
        "--episodes",
        "3",
        "--seed",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for r in summary["returns"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn gradcheck_cli_passes_and_writes_a_report() {
    let tmp = TempDir::new().unwrap();
    let o = bin(&["gradcheck", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: Vec<(String, String, f64)> =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("gradcheck.json")).unwrap())
            .unwrap();
    assert!(rows.iter().all(|(_, _, e)| *e < 1e-4));
}

#[test]
fn gradcheck_covers_every_parameter_set_once_and_catches_a_bad_gradient() {
    let suite = run_gradcheck(&GradcheckOptions::default()).unwrap();
    assert!(suite.passed());
    let mut networks: Vec<&str> = suite.checks.iter().map(|c| c.network.as_str()).collect();
    networks.sort();
    let mut expected: Vec<&str> = GROUPS.iter().copied().chain(["composite"]).collect();
    expected.sort();
    assert_eq!(networks, expected);
    let composite = suite
        .checks
        .iter()
        .find(|c| c.network == "composite")
        .unwrap();
    for g in GROUPS {
        assert!(
            composite
                .report
                .tensors
                .iter()
                .any(|t| t.name.starts_with(&format!("{g}/"))),
            "{g}"
        );
    }

    let hook = |network: &str, grads: &mut [concaveq::diffcore::Tensor]| {
        if network == "critic" {
            grads[0].data_mut()[0] += 0.5;
        }
    };
    let suite = run_gradcheck(&GradcheckOptions {
        hook: Some(&hook),
        ..GradcheckOptions::default()
    })
    .unwrap();
    assert!(!suite.passed());
    let failures = suite.failures();
    assert!(!failures.is_empty());
    assert!(
        failures.iter().all(|(n, _, _)| n == "critic"),
        "{failures:?}"
    );
}

#[test]
fn small_lab_grid_runs_and_respects_the_cap() {
    let tmp = TempDir::new().unwrap();
    let cfg = LabConfig {
        n: vec![1, 2, 3],
        trials: 60,
        envelope_trials: 200,
        ..LabConfig::default()
    };
    let path = write(tmp.path(), "lab.toml", &cfg.to_toml().unwrap());
    let out = tmp.path().join("lab");
    let start = std::time::Instant::now();
    let o = bin(&["lab", s(&path), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(start.elapsed().as_secs() < 60);
    for f in ["recovery.csv", "recovery_trials.jsonl", "envelope.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("recovery.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let (n, mean, ci, bound, cond): (usize, f64, f64, f64, bool) = (
            r[0].parse().unwrap(),
            r[4].parse().unwrap(),
            r[5].parse().unwrap(),
            r[6].parse().unwrap(),
            r[7].parse().unwrap(),
        );
        if n == 1 {
            assert_eq!(mean, 1.0);
        }
        assert!((0.0..=1.0).contains(&mean));
        if cond {
            assert!(mean <= bound + ci);
        }
    }
    let envelope: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("envelope.json")).unwrap()).unwrap();
    assert_eq!(envelope["failures"], 0);
}

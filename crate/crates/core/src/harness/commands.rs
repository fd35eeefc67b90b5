use super::config::RunConfig;
use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::learner::{evaluate, EvalSummary, Learner, MetricsRecord, Trainer};
use crate::nets::Checkpoint;
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_NON_FINITE: i32 = 3;
pub const EXIT_VERSION: i32 = 4;

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const FINAL_EVAL_FILE: &str = "final_eval.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Budget(_) => EXIT_BUDGET,
        Error::NonFinite(_) => EXIT_NON_FINITE,
        Error::Version { .. } => EXIT_VERSION,
        _ => EXIT_FAILURE,
    }
}

/// Fresh learner and environment for `cfg`.
pub fn build_learner(cfg: &RunConfig) -> Result<(Learner, Box<dyn crate::envs::MultiAgentEnv>)> {
    let env = cfg.env.build()?;
    let learner = Learner::new(
        env.info(),
        cfg.train.clone(),
        cfg.nets.clone(),
        cfg.ablation,
        cfg.seed,
    )?;
    Ok((learner, env))
}

fn optimum(env: &EnvConfig) -> Option<Vec<usize>> {
    match env {
        EnvConfig::Matrix(spec) => {
            let (a, b) = spec.optimal_joint_action();
            Some(vec![a, b])
        }
        EnvConfig::PredatorPrey(_) => None,
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub final_eval: EvalSummary,
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    kind: &'static str,
    step: u64,
    episode: u64,
    error: &'a str,
}

/// Trains per `cfg`, writing the config snapshot, JSONL metrics, periodic
/// and final checkpoints and the final evaluation into `out_dir`. A
/// non-finite loss appends a diagnostic record before the error returns.
pub fn train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainOutcome> {
    let ck_dir = out_dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ck_dir)?;
    let snapshot = cfg.to_toml()?;
    fs::write(out_dir.join(CONFIG_FILE), &snapshot)?;
    let mut metrics = BufWriter::new(File::create(out_dir.join(METRICS_FILE))?);

    let (learner, env) = build_learner(cfg)?;
    let mut trainer = Trainer::new(learner, env, cfg.seed);
    if let Some(opt) = optimum(&cfg.env) {
        trainer = trainer.with_optimum(opt);
    }
    let mut checkpoints = Vec::new();
    let every = cfg.checkpoint_every;
    let result = {
        let mut sink = |r: &MetricsRecord| -> Result<()> {
            serde_json::to_writer(&mut metrics, r)?;
            metrics.write_all(b"\n")?;
            Ok(())
        };
        let mut periodic = |t: &Trainer| -> Result<()> {
            if every > 0 && t.episodes.is_multiple_of(every) {
                let path = ck_dir.join(format!("episode_{:08}.ckpt", t.episodes));
                t.learner.checkpoint(snapshot.as_str()).save(&path)?;
                checkpoints.push(path);
            }
            Ok(())
        };
        trainer.run_with(&mut sink, &mut periodic)
    };
    let final_eval = match result {
        Ok(s) => s,
        Err(e) => {
            if matches!(e, Error::NonFinite(_)) {
                let msg = e.to_string();
                let d = Diagnostic {
                    kind: "diagnostic",
                    step: trainer.steps,
                    episode: trainer.episodes,
                    error: &msg,
                };
                serde_json::to_writer(&mut metrics, &d)?;
                metrics.write_all(b"\n")?;
            }
            metrics.flush()?;
            return Err(e);
        }
    };
    metrics.flush()?;
    let path = ck_dir.join(FINAL_CHECKPOINT);
    trainer.learner.checkpoint(snapshot.as_str()).save(&path)?;
    checkpoints.push(path);
    fs::write(
        out_dir.join(FINAL_EVAL_FILE),
        serde_json::to_string_pretty(&final_eval)?,
    )?;
    Ok(TrainOutcome {
        out_dir: out_dir.to_path_buf(),
        final_eval,
        checkpoints,
    })
}

/// Greedy evaluation of a saved checkpoint. The learner is rebuilt from the
/// run configuration stored in the checkpoint.
pub fn evaluate_checkpoint(path: &Path, episodes: usize, seed: u64) -> Result<EvalSummary> {
    let ck = Checkpoint::load(path)?;
    let cfg = RunConfig::parse(&ck.meta)?;
    let (mut learner, mut env) = build_learner(&cfg)?;
    learner.restore(&ck)?;
    let opt = optimum(&cfg.env);
    evaluate(&learner, env.as_mut(), episodes, seed, opt.as_deref())
}

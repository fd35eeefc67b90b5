//! Runs a training job from a TOML run config and prints the final
//! evaluation; the run directory gets the config snapshot, JSONL metrics
//! and checkpoints.
//!
//! cargo run --release --example train_from_config -- configs/smoke.toml [out_dir]

use concaveq::harness::{evaluate_checkpoint, train, RunConfig};
use std::path::PathBuf;

fn main() -> concaveq::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "configs/smoke.toml".into());
    let cfg = RunConfig::load(&path)?;
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let run = train(&cfg, &out)?;
    println!("final eval: mean return {:.3}", run.final_eval.mean_return);
    let last = run.checkpoints.last().expect("final checkpoint");
    let again = evaluate_checkpoint(last, run.final_eval.episodes, 0)?;
    println!(
        "reloaded {}: mean return {:.3}",
        last.display(),
        again.mean_return
    );
    Ok(())
}

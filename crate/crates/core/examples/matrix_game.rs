//! Trains full ConcaveQ and the monotonic-mixer ablation on the 3x3
//! non-monotonic matrix game and reports the greedy joint action per seed.
//!
//! cargo run --release --example matrix_game -- [steps] [seeds]

use concaveq::envs::{EnvConfig, MatrixGameSpec};
use concaveq::learner::{Ablation, Learner, NetConfig, TrainConfig, Trainer};
use concaveq::nets::MixerKind;
use std::time::Instant;

fn main() -> concaveq::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let spec = MatrixGameSpec::non_monotonic();
    let (o1, o2) = spec.optimal_joint_action();
    let env_cfg = EnvConfig::Matrix(spec);

    for mixer in [MixerKind::Concave, MixerKind::Monotonic] {
        let mut solved = 0;
        let started = Instant::now();
        for seed in 0..seeds {
            let env = env_cfg.build()?;
            let config = TrainConfig {
                total_steps: steps,
                eval_interval_steps: steps,
                ..TrainConfig::default()
            };
            let ablation = Ablation {
                mixer,
                ..Ablation::default()
            };
            let learner = Learner::new(env.info(), config, NetConfig::default(), ablation, seed)?;
            let mut trainer = Trainer::new(learner, env, seed).with_optimum(vec![o1, o2]);
            let summary = trainer.run(&mut |_| Ok(()))?;
            let hit = summary.optimal_rate == Some(1.0);
            solved += hit as usize;
            println!(
                "{mixer:?} seed {seed}: greedy joint action {:?}, return {}",
                summary.first_actions[0], summary.mean_return
            );
        }
        println!(
            "{mixer:?}: optimal in {solved}/{seeds} seeds ({:.1}s)",
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

//! Records a random-policy predator-prey episode, replays it from its seed
//! and prints the grid before and after.
//!
//! cargo run --release --example predator_prey_trace -- [seed] [penalty]

use concaveq::envs::{EpisodeTrace, MultiAgentEnv, PredatorPrey, PredatorPreyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn render(env: &PredatorPrey) -> String {
    let g = env.config.grid;
    let mut cells = vec![vec!['.'; g]; g];
    let s = env.state_ref();
    for &(r, c) in s.prey.iter().flatten() {
        cells[r][c] = 'o';
    }
    for &(r, c) in s.predators.iter().flatten() {
        cells[r][c] = if cells[r][c] == 'o' { '*' } else { 'X' };
    }
    cells
        .into_iter()
        .map(|row| row.into_iter().collect::<String>() + "\n")
        .collect()
}

fn main() -> concaveq::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let penalty: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let mut env = PredatorPrey::new(PredatorPreyConfig {
        penalty,
        ..PredatorPreyConfig::default()
    })?;
    env.reset(seed);
    println!("start (X predator, o prey):\n{}", render(&env));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = EpisodeTrace::record(&mut env, seed, |e, _| {
        let avail = e.availability();
        (0..avail.n_agents())
            .map(|i| {
                let row: Vec<usize> = (0..avail.n_actions())
                    .filter(|&j| avail.is_available(i, j))
                    .collect();
                row[rng.gen_range(0..row.len())]
            })
            .collect()
    })?;
    println!("after {} steps:\n{}", trace.steps.len(), render(&env));
    let rewards = trace.rewards();
    println!(
        "return {:.1}, prey left {}, predators left {}",
        rewards.iter().sum::<f64>(),
        env.live_prey(),
        env.live_predators()
    );
    let replayed = trace.replay(&mut env)?;
    println!("replay reproduces rewards: {}", replayed == rewards);
    Ok(())
}

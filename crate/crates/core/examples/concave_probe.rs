//! Probes a randomly initialised concave mixer and its monotonic
//! counterpart along random segments in utility space: the concave mixer
//! never drops below the chord, the monotonic one never decreases when a
//! single utility grows.
//!
//! cargo run --release --example concave_probe -- [segments]

use concaveq::nets::{HyperMixer, MixerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> concaveq::Result<()> {
    let segments: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let (n, sd) = (4, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let concave = HyperMixer::new(MixerKind::Concave, n, sd, &[32, 32, 32], &mut rng);
    let monotonic = HyperMixer::new(MixerKind::Monotonic, n, sd, &[32, 32, 32], &mut rng);
    let point = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect()
    };

    let mut worst_gap = f64::INFINITY;
    let mut worst_step = f64::INFINITY;
    for _ in 0..segments {
        let s = point(&mut rng, sd);
        let (x, y) = (point(&mut rng, n), point(&mut rng, n));
        let t: f64 = rng.gen();
        let mid: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        let chord = t * concave.eval(&x, &s)? + (1.0 - t) * concave.eval(&y, &s)?;
        worst_gap = worst_gap.min(concave.eval(&mid, &s)? - chord);

        let mut up = x.clone();
        up[rng.gen_range(0..n)] += rng.gen_range(0.0..2.0);
        worst_step = worst_step.min(monotonic.eval(&up, &s)? - monotonic.eval(&x, &s)?);
    }
    println!("concave:   min f(mid) - chord      = {worst_gap:+.3e} over {segments} segments");
    println!("monotonic: min f(x + d e_i) - f(x) = {worst_step:+.3e} over {segments} steps");
    Ok(())
}

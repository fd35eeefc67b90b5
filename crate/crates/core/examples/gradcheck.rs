//! Central-difference check of every network's parameters and of the
//! composite training loss, on a small probe learner.
//!
//! cargo run --release --example gradcheck -- [seed]

use concaveq::harness::{run_gradcheck, GradcheckOptions};

fn main() -> concaveq::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let suite = run_gradcheck(&GradcheckOptions {
        seed,
        ..GradcheckOptions::default()
    })?;
    for c in &suite.checks {
        println!(
            "{:<10} {:>3} tensors  max rel error {:.2e}  {}",
            c.network,
            c.report.tensors.len(),
            c.report.max_rel_error(),
            if c.report.passed { "ok" } else { "FAIL" }
        );
    }
    for (network, tensor, err) in suite.failures() {
        println!("failed: {network} {tensor} {err:.2e}");
    }
    Ok(())
}

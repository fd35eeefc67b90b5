//! Mean best recovery fraction of decentralized greedy policies over
//! random value tables, against the (e + 1) / A cap.
//!
//! cargo run --release --example recovery_lab -- [trials]

use concaveq::theorylab::{recovery_curve, CurveRow};

fn main() -> concaveq::Result<()> {
    let trials: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(200);
    println!("{}", CurveRow::CSV_HEADER);
    for actions in [4, 8] {
        let curve = recovery_curve(&[1, 2, 3, 4, 5, 6, 7], 2, actions, trials, 0, 1 << 16)?;
        for row in &curve.rows {
            println!("{}", row.csv());
        }
    }
    Ok(())
}

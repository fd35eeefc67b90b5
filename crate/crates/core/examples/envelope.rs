//! Least concave majorant of a sequence and the shifted majorant that
//! keeps the sequence's argmax.
//!
//! cargo run --release --example envelope -- [values...]

use concaveq::theorylab::{argmax, argmax_preserving_shift, concave_envelope_1d, upper_hull};

fn main() -> concaveq::Result<()> {
    let mut values: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|s| s.parse().ok())
        .collect();
    if values.is_empty() {
        values = vec![1.0, 4.0, 2.0, 2.5, 0.0, 3.0, 1.0];
    }
    let env = concave_envelope_1d(&values)?;
    let shifted = argmax_preserving_shift(&values, &env)?;
    println!(
        "hull vertices {:?}, argmax {}",
        upper_hull(&values),
        argmax(&values)
    );
    println!(
        "{:>3} {:>9} {:>9} {:>9}",
        "i", "value", "envelope", "shifted"
    );
    for i in 0..values.len() {
        println!(
            "{i:>3} {:>9.3} {:>9.3} {:>9.3}",
            values[i], env[i], shifted[i]
        );
    }
    Ok(())
}

use super::config::{LabConfig, MAX_EXHAUSTIVE_BUDGET};
use crate::envs::TABLE_BUDGET;
use crate::error::{Error, Result};
use crate::theorylab::{
    argmax, argmax_preserving_shift, concave_envelope_1d, recovery_curve, CurveRow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

const TOL: f64 = 1e-9;

/// One random sequence and the properties its envelope satisfied.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeCase {
    pub trial: usize,
    pub len: usize,
    pub majorant: bool,
    pub concave: bool,
    pub touches_argmax: bool,
    pub shift_keeps_argmax: bool,
}

impl EnvelopeCase {
    pub fn passed(&self) -> bool {
        self.majorant && self.concave && self.touches_argmax && self.shift_keeps_argmax
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub trials: usize,
    pub failures: usize,
    pub cases: Vec<EnvelopeCase>,
}

/// Random sequences of length `1..=max_len`, half of them drawn from a few
/// integer levels so ties and plateaus occur.
pub fn envelope_fuzz(trials: usize, max_len: usize, seed: u64) -> Result<EnvelopeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(trials);
    for trial in 0..trials {
        let len = rng.gen_range(1..=max_len.max(1));
        let coarse = rng.gen_bool(0.5);
        let values: Vec<f64> = (0..len)
            .map(|_| {
                if coarse {
                    rng.gen_range(0..4) as f64
                } else {
                    rng.gen_range(-10.0..10.0)
                }
            })
            .collect();
        let env = concave_envelope_1d(&values)?;
        let shifted = argmax_preserving_shift(&values, &env)?;
        let top = argmax(&values);
        let shifted_max = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        cases.push(EnvelopeCase {
            trial,
            len,
            majorant: env.iter().zip(&values).all(|(e, v)| *e >= v - TOL),
            concave: env.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] <= TOL),
            touches_argmax: (env[top] - values[top]).abs() <= TOL,
            shift_keeps_argmax: shifted[top] >= shifted_max - TOL,
        });
    }
    let failures = cases.iter().filter(|c| !c.passed()).count();
    Ok(EnvelopeReport {
        trials,
        failures,
        cases,
    })
}

#[derive(Clone, Debug)]
pub struct LabOutcome {
    pub rows: Vec<CurveRow>,
    pub envelope: EnvelopeReport,
    pub files: Vec<PathBuf>,
}

fn check_budget(cfg: &LabConfig) -> Result<()> {
    if cfg.exhaustive_budget > MAX_EXHAUSTIVE_BUDGET {
        return Err(Error::Budget(format!(
            "exhaustive_budget {} exceeds {MAX_EXHAUSTIVE_BUDGET}",
            cfg.exhaustive_budget
        )));
    }
    for &n in &cfg.n {
        let joint_states = cfg
            .states
            .checked_pow(n as u32)
            .filter(|&s| s <= TABLE_BUDGET);
        if joint_states.is_none() {
            return Err(Error::Budget(format!(
                "n={n}, S={} gives more than {TABLE_BUDGET} joint states",
                cfg.states
            )));
        }
        for &a in &cfg.actions {
            if a.checked_pow(n as u32).is_none() {
                return Err(Error::Budget(format!("A={a} to the power n={n} overflows")));
            }
        }
    }
    Ok(())
}

/// Recovery curve for every `(n, A)` cell plus the envelope fuzz. Writes
/// `recovery.csv` (one row per cell), `recovery_trials.jsonl` (one record
/// per trial) and `envelope.json` into `out_dir`. Grids with more joint
/// states than the table budget are refused before any work starts.
pub fn run_lab(cfg: &LabConfig, out_dir: &Path) -> Result<LabOutcome> {
    check_budget(cfg)?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("recovery.csv");
    let jsonl_path = out_dir.join("recovery_trials.jsonl");
    let env_path = out_dir.join("envelope.json");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    let mut jsonl = BufWriter::new(File::create(&jsonl_path)?);
    writeln!(csv, "{}", CurveRow::CSV_HEADER)?;
    let mut rows = Vec::new();
    for &a in &cfg.actions {
        let curve = recovery_curve(
            &cfg.n,
            cfg.states,
            a,
            cfg.trials,
            cfg.seed,
            cfg.exhaustive_budget,
        )?;
        for row in &curve.rows {
            writeln!(csv, "{}", row.csv())?;
        }
        for t in &curve.trials {
            serde_json::to_writer(&mut jsonl, t)?;
            jsonl.write_all(b"\n")?;
        }
        rows.extend(curve.rows);
    }
    csv.flush()?;
    jsonl.flush()?;
    let envelope = envelope_fuzz(cfg.envelope_trials, cfg.envelope_max_len, cfg.seed)?;
    fs::write(&env_path, serde_json::to_string_pretty(&envelope)?)?;
    Ok(LabOutcome {
        rows,
        envelope,
        files: vec![csv_path, jsonl_path, env_path],
    })
}

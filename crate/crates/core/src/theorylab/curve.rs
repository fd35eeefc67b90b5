use super::recovery::{best_recovery_of, Recovery};
use super::table::OptimalActions;
use crate::error::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Cap on the expected recovery fraction: `(e + 1) / A`.
pub fn recovery_bound(actions: usize) -> f64 {
    (std::f64::consts::E + 1.0) / actions as f64
}

/// Whether `n >= log_S(2 A log2 A) + 1`. Never holds for `S <= 1`.
pub fn bound_condition(n: usize, states: usize, actions: usize) -> bool {
    if states <= 1 || actions < 2 {
        return false;
    }
    let a = actions as f64;
    let threshold = (2.0 * a * a.log2()).ln() / (states as f64).ln() + 1.0;
    n as f64 >= threshold
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub states: usize,
    pub actions: usize,
    pub trial: usize,
    pub seed: u64,
    pub fraction: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveRow {
    pub n: usize,
    pub states: usize,
    pub actions: usize,
    pub trials: usize,
    pub mean: f64,
    /// Half-width of the normal 95% interval of the mean.
    pub ci95: f64,
    pub bound: f64,
    pub condition: bool,
    /// True when every trial was solved exhaustively.
    pub exact: bool,
}

impl CurveRow {
    /// Rows meeting the condition must sit under the cap within the CI.
    pub fn respects_bound(&self) -> bool {
        !self.condition || self.mean <= self.bound + self.ci95
    }

    pub const CSV_HEADER: &'static str = "n,states,actions,trials,mean,ci95,bound,condition,exact";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            self.n,
            self.states,
            self.actions,
            self.trials,
            self.mean,
            self.ci95,
            self.bound,
            self.condition,
            self.exact
        )
    }
}

#[derive(Clone, Debug)]
pub struct RecoveryCurve {
    pub rows: Vec<CurveRow>,
    pub trials: Vec<TrialRecord>,
}

fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (trial as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Mean best-monotonic recovery fraction per `n` over random tables whose
/// optimal joint action is uniform per joint state.
pub fn recovery_curve(
    n_list: &[usize],
    states: usize,
    actions: usize,
    trials: usize,
    seed: u64,
    budget: usize,
) -> Result<RecoveryCurve> {
    let mut rows = Vec::with_capacity(n_list.len());
    let mut records = Vec::new();
    for &n in n_list {
        let results: Vec<(u64, Recovery)> = (0..trials)
            .map(|t| {
                let s = trial_seed(seed, n, t);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let opt = OptimalActions::random(n, states, actions, &mut rng)?;
                Ok((s, best_recovery_of(&opt, budget, s)))
            })
            .collect::<Result<_>>()?;
        let fractions: Vec<f64> = results.iter().map(|(_, r)| r.fraction).collect();
        let mean = fractions.iter().sum::<f64>() / trials.max(1) as f64;
        let var = if trials > 1 {
            fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
        } else {
            0.0
        };
        let ci95 = 1.96 * (var / trials.max(1) as f64).sqrt();
        rows.push(CurveRow {
            n,
            states,
            actions,
            trials,
            mean,
            ci95,
            bound: recovery_bound(actions),
            condition: bound_condition(n, states, actions),
            exact: results.iter().all(|(_, r)| r.exact),
        });
        records.extend(
            results
                .into_iter()
                .enumerate()
                .map(|(t, (s, r))| TrialRecord {
                    n,
                    states,
                    actions,
                    trial: t,
                    seed: s,
                    fraction: r.fraction,
                    exact: r.exact,
                }),
        );
    }
    Ok(RecoveryCurve {
        rows,
        trials: records,
    })
}

use super::config::TrainConfig;
use crate::error::{Error, Result};

/// Linear exploration schedule, clamped after `eps_anneal_steps`.
pub fn epsilon(config: &TrainConfig, step: u64) -> f64 {
    if config.eps_anneal_steps == 0 || step >= config.eps_anneal_steps {
        return config.eps_end;
    }
    let frac = step as f64 / config.eps_anneal_steps as f64;
    config.eps_start + frac * (config.eps_end - config.eps_start)
}

/// One-step target `r + gamma * Q'` (just `r` on terminal transitions).
pub fn td_target(reward: f64, terminal: bool, gamma: f64, next_value: f64) -> Result<f64> {
    if !reward.is_finite() || !gamma.is_finite() || (!terminal && !next_value.is_finite()) {
        return Err(Error::NonFinite(format!(
            "td target inputs r={reward}, gamma={gamma}, next={next_value}"
        )));
    }
    Ok(if terminal {
        reward
    } else {
        reward + gamma * next_value
    })
}

/// `1` when `Q_tot` underestimates the target, `w_nonoptimal` otherwise.
pub fn weight_fn(q_tot: f64, y: f64, w_nonoptimal: f64) -> f64 {
    if q_tot < y {
        1.0
    } else {
        w_nonoptimal
    }
}

fn check_batch(pred: &[f64], y: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if pred.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} targets",
            pred.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Mean squared error of the unrestricted estimator.
pub fn loss_qstar(qstar: &[f64], y: &[f64]) -> Result<f64> {
    check_batch(qstar, y)?;
    Ok(qstar
        .iter()
        .zip(y)
        .map(|(q, t)| (q - t).powi(2))
        .sum::<f64>()
        / y.len() as f64)
}

/// Weighted mean squared error of the concave mixer.
pub fn loss_concaveq(q_tot: &[f64], y: &[f64], w_nonoptimal: f64) -> Result<f64> {
    check_batch(q_tot, y)?;
    Ok(q_tot
        .iter()
        .zip(y)
        .map(|(q, t)| weight_fn(*q, *t, w_nonoptimal) * (q - t).powi(2))
        .sum::<f64>()
        / y.len() as f64)
}

/// Everything the policy loss needs for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySample {
    /// Soft-critic weights `w_i(s)`.
    pub critic_w: Vec<f64>,
    pub critic_b: f64,
    /// Per-agent action values, `(n, A)` row-major.
    pub q: Vec<f64>,
    /// Policy probabilities, `(n, A)` row-major.
    pub probs: Vec<f64>,
    pub avail: Vec<bool>,
}

/// Per-agent temperature `alpha / max(w_i, 1e-6)`.
pub fn agent_alpha(alpha: f64, w: f64) -> f64 {
    alpha / w.max(1e-6)
}

/// `E_pi[q_i - alpha_i log pi_i]` per agent over available actions.
pub fn soft_values(sample: &PolicySample, alpha: f64, n_actions: usize) -> Result<Vec<f64>> {
    let n = sample.critic_w.len();
    (0..n)
        .map(|i| {
            let row = i * n_actions..(i + 1) * n_actions;
            let (p, q, m) = (
                &sample.probs[row.clone()],
                &sample.q[row.clone()],
                &sample.avail[row],
            );
            let mass: f64 = p.iter().zip(m).filter(|(_, ok)| **ok).map(|(p, _)| p).sum();
            if !m.iter().any(|&ok| ok) || mass <= 0.0 {
                return Err(Error::NoAvailableAction(i));
            }
            let ai = agent_alpha(alpha, sample.critic_w[i]);
            Ok(p.iter()
                .zip(q)
                .zip(m)
                .filter(|(_, ok)| **ok)
                .filter(|((p, _), _)| **p > 0.0)
                .map(|((p, q), _)| p * (q - ai * p.ln()))
                .sum())
        })
        .collect()
}

/// Negative soft-critic value, averaged over the batch.
pub fn loss_policy(batch: &[PolicySample], alpha: f64, n_actions: usize) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for s in batch {
        let x = soft_values(s, alpha, n_actions)?;
        total += s.critic_w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() + s.critic_b;
    }
    Ok(-total / batch.len() as f64)
}

/// Entropy of one categorical distribution.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Target entropy `0.98 log k` for `k` available actions.
pub fn target_entropy(available: usize) -> f64 {
    0.98 * (available.max(1) as f64).ln()
}

/// One gradient step on `L(alpha) = E[-alpha (log pi + H_target)]`
/// w.r.t. `log alpha`. `entropies` holds `(H, H_target)` pairs.
pub fn alpha_update(log_alpha: f64, lr_alpha: f64, entropies: &[(f64, f64)]) -> f64 {
    if entropies.is_empty() {
        return log_alpha;
    }
    let gap = entropies.iter().map(|(h, t)| h - t).sum::<f64>() / entropies.len() as f64;
    log_alpha - lr_alpha * log_alpha.exp() * gap
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule() {
        let c = TrainConfig::default();
        assert_eq!(epsilon(&c, 0), 0.995);
        assert_eq!(epsilon(&c, 100_000), 0.05);
        assert_eq!(epsilon(&c, 250_000), 0.05);
        assert!((epsilon(&c, 50_000) - 0.5225).abs() < 1e-12);
    }

    #[test]
    fn targets_and_weights() {
        assert_eq!(td_target(10.0, true, 0.99, f64::NAN).unwrap(), 10.0);
        assert!((td_target(0.0, false, 0.99, 2.0).unwrap() - 1.98).abs() < 1e-15);
        assert!(td_target(f64::INFINITY, true, 0.99, 0.0).is_err());
        assert_eq!(weight_fn(5.0, 6.0, 0.5), 1.0);
        assert_eq!(weight_fn(6.0, 5.0, 0.5), 0.5);
        assert_eq!(weight_fn(5.0, 5.0, 0.5), 0.5);
    }

    #[test]
    fn squared_losses() {
        assert_eq!(loss_qstar(&[3.0], &[1.0]).unwrap(), 4.0);
        assert_eq!(loss_qstar(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_concaveq(&[4.0], &[6.0], 0.5).unwrap(), 4.0);
        assert_eq!(loss_concaveq(&[6.0], &[4.0], 0.5).unwrap(), 2.0);
        assert!(loss_qstar(&[], &[]).is_err());
        assert!(loss_concaveq(&[], &[], 0.5).is_err());
    }

    #[test]
    fn policy_loss_cases() {
        let zero = PolicySample {
            critic_w: vec![1.0],
            critic_b: 0.0,
            q: vec![0.0, 0.0],
            probs: vec![0.5, 0.5],
            avail: vec![true, true],
        };
        assert_eq!(loss_policy(&[zero], 0.0, 2).unwrap(), 0.0);

        let uniform = PolicySample {
            critic_w: vec![1.0],
            critic_b: 0.0,
            q: vec![0.0; 4],
            probs: vec![0.25; 4],
            avail: vec![true; 4],
        };
        let x = soft_values(&uniform, 1.0, 4).unwrap();
        assert!((x[0] - 4f64.ln()).abs() < 1e-12);

        let masked = PolicySample {
            avail: vec![false; 4],
            ..uniform
        };
        assert!(matches!(
            loss_policy(&[masked], 1.0, 4),
            Err(Error::NoAvailableAction(0))
        ));
    }

    #[test]
    fn alpha_rule() {
        let t = target_entropy(4);
        assert_eq!(alpha_update(-0.07, 3e-4, &[(t, t)]), -0.07);
        assert!(alpha_update(-0.07, 3e-4, &[(0.1, t)]) > -0.07);
        assert!(alpha_update(-0.07, 3e-4, &[(4f64.ln(), t)]) < -0.07);
    }
}

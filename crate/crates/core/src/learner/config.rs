use crate::error::{Error, Result};
use crate::nets::MixerKind;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Per-agent action values fed to the soft critic in the policy loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyInput {
    /// `Q_tot(s, u_hat)` with agent `i`'s action replaced by each candidate.
    #[default]
    Counterfactual,
    /// The agent's own utility `Q_i(tau_i, .)`.
    Utility,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_alpha: f64,
    pub log_alpha_init: f64,
    pub batch: usize,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_anneal_steps: u64,
    pub target_update_episodes: u64,
    pub w_nonoptimal: f64,
    /// Stored only; targets are one-step.
    pub td_lambda: f64,
    pub eval_episodes: usize,
    pub eval_interval_steps: u64,
    /// Coordinate-ascent sweep cap; `0` means one sweep per agent.
    pub max_sweeps: usize,
    /// Counted in transitions.
    pub buffer_capacity: usize,
    pub obs_window: usize,
    pub updates_per_episode: usize,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm cap; `0` disables clipping.
    pub grad_clip: f64,
    pub policy_input: PolicyInput,
    /// Environment-step budget of a run.
    pub total_steps: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            lr_alpha: 0.0003,
            log_alpha_init: -0.07,
            batch: 128,
            gamma: 0.99,
            eps_start: 0.995,
            eps_end: 0.05,
            eps_anneal_steps: 100_000,
            target_update_episodes: 200,
            w_nonoptimal: 0.5,
            td_lambda: 0.6,
            eval_episodes: 32,
            eval_interval_steps: 1000,
            max_sweeps: 0,
            buffer_capacity: 10_000,
            obs_window: 4,
            updates_per_episode: 1,
            optimizer: OptimizerKind::Sgd,
            grad_clip: 10.0,
            policy_input: PolicyInput::Counterfactual,
            total_steps: 10_000,
        }
    }
}

impl TrainConfig {
    /// Errors name the offending field first, as `field: reason`.
    pub fn validate(&self) -> Result<()> {
        let rules: [(bool, &str, &str); 14] = [
            (self.lr > 0.0, "lr", "must be > 0"),
            (self.lr_alpha > 0.0, "lr_alpha", "must be > 0"),
            (
                (0.0..=1.0).contains(&self.eps_start),
                "eps_start",
                "must lie in [0, 1]",
            ),
            (
                (0.0..=1.0).contains(&self.eps_end),
                "eps_end",
                "must lie in [0, 1]",
            ),
            (
                self.eps_start >= self.eps_end,
                "eps_end",
                "must not exceed eps_start",
            ),
            (
                (0.0..=1.0).contains(&self.gamma),
                "gamma",
                "must lie in [0, 1]",
            ),
            (
                self.w_nonoptimal > 0.0 && self.w_nonoptimal <= 1.0,
                "w_nonoptimal",
                "must lie in (0, 1]",
            ),
            (self.batch >= 1, "batch", "must be >= 1"),
            (self.obs_window >= 1, "obs_window", "must be >= 1"),
            (
                self.buffer_capacity >= self.batch,
                "buffer_capacity",
                "must be >= batch",
            ),
            (
                self.target_update_episodes >= 1,
                "target_update_episodes",
                "must be >= 1",
            ),
            (
                self.eval_interval_steps >= 1,
                "eval_interval_steps",
                "must be >= 1",
            ),
            (
                self.log_alpha_init.is_finite(),
                "log_alpha_init",
                "must be finite",
            ),
            (self.grad_clip >= 0.0, "grad_clip", "must be >= 0"),
        ];
        match rules.iter().find(|(ok, _, _)| !ok) {
            Some((_, field, why)) => Err(Error::Config(format!("{field}: {why}"))),
            None => Ok(()),
        }
    }

    pub fn sweeps(&self, n_agents: usize) -> usize {
        if self.max_sweeps == 0 {
            n_agents.max(1)
        } else {
            self.max_sweeps
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub agent_hidden: Vec<usize>,
    pub policy_hidden: Vec<usize>,
    /// Widths of `z1..z(k-1)`.
    pub mixer_widths: Vec<usize>,
    pub qstar_hidden: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            agent_hidden: vec![64],
            policy_hidden: vec![64],
            mixer_widths: vec![32, 32, 32],
            qstar_hidden: vec![64],
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mixer_widths.is_empty() {
            return Err(Error::Config(
                "mixer_widths: needs at least one entry".into(),
            ));
        }
        let all = [
            ("agent_hidden", &self.agent_hidden),
            ("policy_hidden", &self.policy_hidden),
            ("mixer_widths", &self.mixer_widths),
            ("qstar_hidden", &self.qstar_hidden),
        ];
        match all.iter().find(|(_, v)| v.contains(&0)) {
            Some((field, _)) => Err(Error::Config(format!("{field}: layer widths must be >= 1"))),
            None => Ok(()),
        }
    }
}

/// Component switches for ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub mixer: MixerKind,
    pub iter_selection: bool,
    pub soft_policy: bool,
    pub central_qstar: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            mixer: MixerKind::Concave,
            iter_selection: true,
            soft_policy: true,
            central_qstar: true,
        }
    }
}

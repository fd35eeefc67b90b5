//! Environments: grid-world predator-prey, one-step matrix games and the
//! random value-table generator used by the theory lab.

mod matrix;
pub mod predator_prey;
mod tabular;
mod trace;

pub use matrix::{MatrixGame, MatrixGameSpec};
pub use predator_prey::{PredatorPrey, PredatorPreyConfig, PredatorPreyState};
pub(crate) use tabular::checked_power;
pub use tabular::{random_tabular_q, TABLE_BUDGET};
pub use trace::{EpisodeTrace, TraceStep};

use crate::actsel::Availability;
use crate::error::Result;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnvInfo {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub episode_limit: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutput {
    pub reward: f64,
    pub done: bool,
}

/// Cooperative environment with a shared reward.
pub trait MultiAgentEnv: Send {
    fn info(&self) -> EnvInfo;
    fn reset(&mut self, seed: u64);
    fn step(&mut self, actions: &[usize]) -> Result<StepOutput>;
    fn observations(&self) -> Vec<Vec<f64>>;
    fn state(&self) -> Vec<f64>;
    fn availability(&self) -> Availability;
}

/// Environment section of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    PredatorPrey(PredatorPreyConfig),
    Matrix(MatrixGameSpec),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Matrix(MatrixGameSpec::default())
    }
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn MultiAgentEnv>> {
        Ok(match self {
            EnvConfig::PredatorPrey(c) => Box::new(PredatorPrey::new(c.clone())?),
            EnvConfig::Matrix(spec) => Box::new(MatrixGame::new(spec.clone())?),
        })
    }
}

use super::{EnvInfo, MultiAgentEnv, StepOutput};
use crate::actsel::Availability;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Two-agent one-step cooperative game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixGameSpec {
    pub payoff: Vec<Vec<f64>>,
}

impl Default for MatrixGameSpec {
    fn default() -> Self {
        Self::non_monotonic()
    }
}

impl MatrixGameSpec {
    pub fn new(payoff: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self { payoff };
        spec.validate()?;
        Ok(spec)
    }

    /// Optimum 8 at `(0, 0)`, -12 for miscoordinating on it, 0 elsewhere.
    pub fn non_monotonic() -> Self {
        Self {
            payoff: vec![
                vec![8.0, -12.0, -12.0],
                vec![-12.0, 0.0, 0.0],
                vec![-12.0, 0.0, 0.0],
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.payoff.len();
        if a == 0 || self.payoff.iter().any(|r| r.len() != a) {
            return Err(Error::InvalidArgument(
                "payoff must be a non-empty square table".into(),
            ));
        }
        if self.payoff.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("payoff entry".into()));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.payoff.len()
    }

    /// Exhaustive argmax, lowest `(u1, u2)` on ties.
    pub fn optimal_joint_action(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (i, row) in self.payoff.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > self.payoff[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    }

    pub fn optimal_value(&self) -> f64 {
        let (i, j) = self.optimal_joint_action();
        self.payoff[i][j]
    }

    /// Reward of one joint action; every episode has length one.
    pub fn matrix_step(&self, actions: &[usize]) -> Result<(f64, bool)> {
        let a = self.n_actions();
        match actions {
            [u1, u2] if *u1 < a && *u2 < a => Ok((self.payoff[*u1][*u2], true)),
            [u1, u2] => Err(Error::InvalidArgument(format!(
                "joint action ({u1}, {u2}) out of range for {a} actions"
            ))),
            _ => Err(Error::InvalidArgument(format!(
                "matrix game takes 2 actions, got {}",
                actions.len()
            ))),
        }
    }
}

/// [`MatrixGameSpec`] as an environment with a constant observation.
#[derive(Clone, Debug)]
pub struct MatrixGame {
    pub spec: MatrixGameSpec,
    done: bool,
}

impl MatrixGame {
    pub fn new(spec: MatrixGameSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, done: false })
    }
}

impl MultiAgentEnv for MatrixGame {
    fn info(&self) -> EnvInfo {
        EnvInfo {
            n_agents: 2,
            n_actions: self.spec.n_actions(),
            obs_dim: 1,
            state_dim: 1,
            episode_limit: 1,
        }
    }

    fn reset(&mut self, _seed: u64) {
        self.done = false;
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepOutput> {
        let (reward, done) = self.spec.matrix_step(actions)?;
        self.done = done;
        Ok(StepOutput { reward, done })
    }

    fn observations(&self) -> Vec<Vec<f64>> {
        vec![vec![1.0]; 2]
    }

    fn state(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn availability(&self) -> Availability {
        Availability::all(2, self.spec.n_actions())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_lookup_and_optimum() {
        let spec = MatrixGameSpec::non_monotonic();
        assert_eq!(spec.matrix_step(&[0, 0]).unwrap(), (8.0, true));
        assert_eq!(spec.matrix_step(&[1, 2]).unwrap(), (0.0, true));
        assert_eq!(spec.optimal_joint_action(), (0, 0));
        assert!(spec.matrix_step(&[3, 0]).is_err());
    }

    #[test]
    fn zero_table() {
        let spec = MatrixGameSpec::new(vec![vec![0.0; 3]; 3]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(spec.matrix_step(&[i, j]).unwrap().0, 0.0);
            }
        }
    }
}

use super::layers::Mlp;
use super::params::ParameterSet;
use crate::diffcore::{softmax_rows, Tape, Tensor, Var};
use crate::error::{Error, Result};
use rand::Rng;

/// Added to the logits / utilities of unavailable actions.
pub const MASK_SENTINEL: f64 = -1e9;

/// Input layout shared by the utility and policy networks: a window of the
/// last `obs_window` local observations followed by a one-hot agent id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentInputSpec {
    pub obs_dim: usize,
    pub obs_window: usize,
    pub n_agents: usize,
}

impl AgentInputSpec {
    pub fn input_dim(&self) -> usize {
        self.obs_dim * self.obs_window + self.n_agents
    }

    /// Builds one input row. `window` is oldest first and must hold
    /// `obs_window` observations.
    pub fn row(&self, agent: usize, window: &[&[f64]]) -> Vec<f64> {
        debug_assert_eq!(window.len(), self.obs_window);
        let mut row = Vec::with_capacity(self.input_dim());
        for obs in window {
            row.extend_from_slice(obs);
        }
        let mut id = vec![0.0; self.n_agents];
        id[agent] = 1.0;
        row.extend(id);
        row
    }
}

/// Shared per-agent utility network `Q_i(tau_i, .)`.
#[derive(Clone, Debug)]
pub struct AgentUtilityNet {
    pub params: ParameterSet,
    pub input: AgentInputSpec,
    pub n_actions: usize,
    mlp: Mlp,
}

impl AgentUtilityNet {
    pub fn new<R: Rng + ?Sized>(
        input: AgentInputSpec,
        hidden: &[usize],
        n_actions: usize,
        rng: &mut R,
    ) -> Self {
        let mut params = ParameterSet::new();
        let mlp = Mlp::new(
            &mut params,
            "utility",
            input.input_dim(),
            hidden,
            n_actions,
            rng,
        );
        Self {
            params,
            input,
            n_actions,
            mlp,
        }
    }

    /// `rows` is `(n, input_dim)`; returns `(n, n_actions)`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], rows: Var) -> Result<Var> {
        self.mlp.forward(tape, vars, rows)
    }

    /// Plain evaluation with explicit parameters (e.g. a target copy).
    pub fn utilities_with(&self, params: &ParameterSet, rows: &[f64]) -> Vec<f64> {
        self.mlp.apply(params, rows)
    }

    pub fn utilities(&self, rows: &[f64]) -> Vec<f64> {
        self.utilities_with(&self.params, rows)
    }
}

/// Shared per-agent soft policy `pi_i(. | tau_i)`.
#[derive(Clone, Debug)]
pub struct PolicyNet {
    pub params: ParameterSet,
    pub input: AgentInputSpec,
    pub n_actions: usize,
    mlp: Mlp,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(
        input: AgentInputSpec,
        hidden: &[usize],
        n_actions: usize,
        rng: &mut R,
    ) -> Self {
        let mut params = ParameterSet::new();
        let mlp = Mlp::new(
            &mut params,
            "policy",
            input.input_dim(),
            hidden,
            n_actions,
            rng,
        );
        Self {
            params,
            input,
            n_actions,
            mlp,
        }
    }

    fn mask_tensor(&self, avail: &[bool]) -> Result<Tensor> {
        let rows = avail.len() / self.n_actions;
        for (i, row) in avail.chunks(self.n_actions).enumerate() {
            if !row.iter().any(|&a| a) {
                return Err(Error::NoAvailableAction(i));
            }
        }
        let data = avail
            .iter()
            .map(|&a| if a { 0.0 } else { MASK_SENTINEL })
            .collect();
        Tensor::matrix(rows, self.n_actions, data)
    }

    /// Returns `(probs, log_probs)`, both `(n, n_actions)`. Unavailable
    /// actions get exactly zero probability.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        rows: Var,
        avail: &[bool],
    ) -> Result<(Var, Var)> {
        let logits = self.mlp.forward(tape, vars, rows)?;
        let mask = tape.constant(self.mask_tensor(avail)?);
        let masked = tape.add(logits, mask)?;
        Ok((tape.softmax(masked), tape.log_softmax(masked)))
    }

    /// Plain probabilities, `(n, n_actions)` row-major.
    pub fn probs(&self, rows: &[f64], avail: &[bool]) -> Result<Vec<f64>> {
        let mut logits = self.mlp.apply(&self.params, rows);
        let mask = self.mask_tensor(avail)?;
        for (l, m) in logits.iter_mut().zip(mask.data()) {
            *l += m;
        }
        let t = Tensor::matrix(logits.len() / self.n_actions, self.n_actions, logits)?;
        Ok(softmax_rows(&t).into_data())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> AgentInputSpec {
        AgentInputSpec {
            obs_dim: 3,
            obs_window: 2,
            n_agents: 2,
        }
    }

    #[test]
    fn utility_output_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = AgentUtilityNet::new(spec(), &[8], 5, &mut rng);
        let row = spec().row(1, &[&[0.1, 0.2, 0.3], &[0.0, 1.0, 0.0]]);
        assert_eq!(row.len(), 8);
        assert_eq!(net.utilities(&row).len(), 5);
    }

    #[test]
    fn policy_is_masked_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = PolicyNet::new(spec(), &[8], 4, &mut rng);
        for trial in 0..200 {
            let rows: Vec<f64> = (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut avail: Vec<bool> = (0..8).map(|_| rng.gen_bool(0.6)).collect();
            avail[trial % 4] = true;
            avail[4 + trial % 4] = true;
            let p = net.probs(&rows, &avail).unwrap();
            for (row, mask) in p.chunks(4).zip(avail.chunks(4)) {
                let s: f64 = row.iter().sum();
                assert!((s - 1.0).abs() <= 1e-9);
                for (pi, ok) in row.iter().zip(mask) {
                    assert!(*pi >= 0.0);
                    if !ok {
                        assert!(*pi <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn fully_masked_agent_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = PolicyNet::new(spec(), &[4], 2, &mut rng);
        let rows = vec![0.0; 16];
        let err = net.probs(&rows, &[true, false, false, false]).unwrap_err();
        assert!(matches!(err, Error::NoAvailableAction(1)));
    }
}

use crate::envs::checked_power;
use crate::error::{Error, Result};
use rand::Rng;

/// Decodes a mixed-radix index (agent 0 most significant) into digits.
pub fn decode(mut index: usize, base: usize, n: usize) -> Vec<usize> {
    let mut digits = vec![0; n];
    for d in digits.iter_mut().rev() {
        *d = index % base;
        index /= base;
    }
    digits
}

pub fn encode(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

/// Dense joint value table over `S^n` joint states and `A^n` joint actions.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularQ {
    n: usize,
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl TabularQ {
    pub fn new(n: usize, states: usize, actions: usize, values: Vec<f64>) -> Result<Self> {
        let js = checked_power(states, n);
        let ja = checked_power(actions, n);
        let expected = js.zip(ja).and_then(|(a, b)| a.checked_mul(b));
        if expected != Some(values.len()) {
            return Err(Error::InvalidArgument(format!(
                "table for n={n}, S={states}, A={actions} cannot hold {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabular value".into()));
        }
        Ok(Self {
            n,
            states,
            actions,
            values,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn local_states(&self) -> usize {
        self.states
    }

    pub fn local_actions(&self) -> usize {
        self.actions
    }

    pub fn joint_states(&self) -> usize {
        self.states.pow(self.n as u32)
    }

    pub fn joint_actions(&self) -> usize {
        self.actions.pow(self.n as u32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, joint_state: usize, joint_action: usize) -> f64 {
        self.values[joint_state * self.joint_actions() + joint_action]
    }

    /// Argmax joint action of one joint state, lowest index on ties.
    pub fn argmax(&self, joint_state: usize) -> usize {
        let ja = self.joint_actions();
        let row = &self.values[joint_state * ja..(joint_state + 1) * ja];
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        best
    }

    pub fn optimal_actions(&self) -> OptimalActions {
        OptimalActions {
            n: self.n,
            states: self.states,
            actions: self.actions,
            optimal: (0..self.joint_states()).map(|s| self.argmax(s)).collect(),
        }
    }
}

/// The optimal joint action of every joint state; all that recovery
/// fractions depend on.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalActions {
    pub n: usize,
    pub states: usize,
    pub actions: usize,
    /// Encoded joint action per joint state.
    pub optimal: Vec<usize>,
}

impl OptimalActions {
    /// Uniform optimal joint action per joint state; distributed exactly as
    /// the argmax of [`crate::envs::random_tabular_q`].
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        states: usize,
        actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let js = checked_power(states, n)
            .filter(|&v| v <= 1 << 24)
            .ok_or_else(|| Error::Budget(format!("S^n = {states}^{n} joint states")))?;
        let ja = checked_power(actions, n)
            .ok_or_else(|| Error::Budget(format!("A^n = {actions}^{n} joint actions")))?;
        Ok(Self {
            n,
            states,
            actions,
            optimal: (0..js).map(|_| rng.gen_range(0..ja)).collect(),
        })
    }

    pub fn joint_states(&self) -> usize {
        self.optimal.len()
    }

    /// Per-agent digits of each joint state's optimum, state-major.
    pub(crate) fn optimal_digits(&self) -> Vec<usize> {
        self.optimal
            .iter()
            .flat_map(|&u| decode(u, self.actions, self.n))
            .collect()
    }

    pub(crate) fn state_digits(&self) -> Vec<usize> {
        (0..self.joint_states())
            .flat_map(|s| decode(s, self.states, self.n))
            .collect()
    }
}

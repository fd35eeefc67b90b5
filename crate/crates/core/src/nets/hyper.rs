use super::layers::Linear;
use super::params::ParameterSet;
use crate::diffcore::{Tape, Var};
use crate::error::Result;
use rand::Rng;

/// One generated tensor: `reshape(act(A s + c))` with `act = |.|` when
/// `absolute` is set, identity otherwise.
#[derive(Clone, Debug)]
pub struct HyperHead {
    pub name: String,
    pub layer: Linear,
    pub shape: Vec<usize>,
    pub absolute: bool,
}

/// State-conditioned generator for the weights and biases of a mixer.
#[derive(Clone, Debug)]
pub struct Hypernetwork {
    pub params: ParameterSet,
    pub heads: Vec<HyperHead>,
    pub state_dim: usize,
}

impl Hypernetwork {
    pub fn new(state_dim: usize) -> Self {
        Self {
            params: ParameterSet::new(),
            heads: Vec::new(),
            state_dim,
        }
    }

    /// Adds a head and returns its index. `scale` multiplies the default
    /// `±1/sqrt(state_dim)` init.
    pub fn add_head<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        shape: &[usize],
        absolute: bool,
        scale: f64,
        rng: &mut R,
    ) -> usize {
        let out: usize = shape.iter().product();
        let layer = Linear::new(&mut self.params, name, self.state_dim, out, rng);
        if scale != 1.0 {
            for slot in [layer.w, layer.b] {
                for v in self.params.tensor_mut(slot).data_mut() {
                    *v *= scale;
                }
            }
        }
        self.heads.push(HyperHead {
            name: name.to_string(),
            layer,
            shape: shape.to_vec(),
            absolute,
        });
        self.heads.len() - 1
    }

    /// `state` is `(state_dim)` or a batch `(rows, state_dim)`; a batch
    /// yields `(rows, shape..)`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], head: usize, state: Var) -> Result<Var> {
        let h = &self.heads[head];
        let raw = h.layer.forward(tape, vars, state)?;
        let act = if h.absolute { tape.abs(raw) } else { raw };
        let mut shape = match tape.value(state).shape() {
            [rows, _] => vec![*rows],
            _ => Vec::new(),
        };
        shape.extend_from_slice(&h.shape);
        tape.reshape(act, &shape)
    }

    /// Plain evaluation with explicit parameters, flat row-major.
    pub fn generate_with(&self, params: &ParameterSet, head: usize, state: &[f64]) -> Vec<f64> {
        let h = &self.heads[head];
        let mut out = h.layer.apply(params, state);
        if h.absolute {
            for v in &mut out {
                *v = v.abs();
            }
        }
        out
    }

    pub fn generate(&self, head: usize, state: &[f64]) -> Vec<f64> {
        self.generate_with(&self.params, head, state)
    }

    /// Makes a head ignore the state and emit `values` (before the
    /// absolute activation, if any).
    pub fn set_constant(&mut self, head: usize, values: &[f64]) {
        let layer = self.heads[head].layer.clone();
        assert_eq!(values.len(), layer.out);
        for v in self.params.tensor_mut(layer.w).data_mut() {
            *v = 0.0;
        }
        self.params
            .tensor_mut(layer.b)
            .data_mut()
            .copy_from_slice(values);
    }
}

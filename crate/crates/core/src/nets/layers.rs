use super::params::ParameterSet;
use crate::diffcore::{affine_row, Tape, Tensor, Var};
use crate::error::Result;
use rand::Rng;

/// Dense layer whose tensors live in a [`ParameterSet`].
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub inp: usize,
    pub out: usize,
}

impl Linear {
    /// Uniform init in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        name: &str,
        inp: usize,
        out: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (inp.max(1) as f64).sqrt();
        let w = params.push(
            format!("{name}.weight"),
            Tensor::uniform(&[out, inp], bound, rng),
        );
        let b = params.push(format!("{name}.bias"), Tensor::uniform(&[out], bound, rng));
        Self { w, b, inp, out }
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        tape.affine(vars[self.w], vars[self.b], x)
    }

    /// Plain evaluation over `rows` stacked inputs.
    pub fn apply(&self, params: &ParameterSet, x: &[f64]) -> Vec<f64> {
        let (w, b) = (params.tensor(self.w).data(), params.tensor(self.b).data());
        let rows = x.len() / self.inp.max(1);
        let mut out = Vec::with_capacity(rows * self.out);
        for r in 0..rows {
            affine_row(w, b, &x[r * self.inp..(r + 1) * self.inp], &mut out);
        }
        out
    }
}

/// Feed-forward stack with ReLU between layers and a linear head.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        name: &str,
        inp: usize,
        hidden: &[usize],
        out: usize,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::new();
        let mut prev = inp;
        for (i, &h) in hidden.iter().enumerate() {
            layers.push(Linear::new(params, &format!("{name}.{i}"), prev, h, rng));
            prev = h;
        }
        layers.push(Linear::new(params, &format!("{name}.out"), prev, out, rng));
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inp
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, vars, h)?;
            if i < last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    pub fn apply(&self, params: &ParameterSet, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(params, &h);
            if i < last {
                relu_in_place(&mut h);
            }
        }
        h
    }
}

pub(crate) fn relu_in_place(xs: &mut [f64]) {
    for v in xs {
        if v.is_nan() || *v <= 0.0 {
            *v = 0.0;
        }
    }
}

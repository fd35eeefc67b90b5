use super::config::OptimizerKind;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::nets::ParameterSet;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First-order optimizer over several parameter groups with optional
/// global-norm clipping.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub clip: f64,
    /// Adam moments per group; empty for SGD.
    pub m: Vec<ParameterSet>,
    pub v: Vec<ParameterSet>,
    pub t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, clip: f64, groups: &[&ParameterSet]) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (
                groups.iter().map(|g| g.zeros_like()).collect(),
                groups.iter().map(|g| g.zeros_like()).collect(),
            ),
        };
        Self {
            kind,
            lr,
            clip,
            m,
            v,
            t: 0,
        }
    }

    /// Global L2 norm over all gradients.
    pub fn grad_norm(grads: &[Vec<Tensor>]) -> f64 {
        grads
            .iter()
            .flatten()
            .flat_map(|t| t.data())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Applies one update. `grads[g][k]` is the gradient of tensor `k` in
    /// group `g`; `active[g] == false` leaves that group untouched.
    /// Returns the pre-clip gradient norm.
    pub fn step(
        &mut self,
        groups: &mut [&mut ParameterSet],
        grads: &[Vec<Tensor>],
        active: &[bool],
    ) -> Result<f64> {
        if groups.len() != grads.len() || groups.len() != active.len() {
            return Err(Error::InvalidArgument(
                "optimizer group count mismatch".into(),
            ));
        }
        let norm = Self::grad_norm(grads);
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("gradient norm {norm}")));
        }
        let scale = if self.clip > 0.0 && norm > self.clip {
            self.clip / norm
        } else {
            1.0
        };
        self.t += 1;
        let (bc1, bc2) = (
            1.0 - BETA1.powi(self.t as i32),
            1.0 - BETA2.powi(self.t as i32),
        );
        for (gi, (params, gs)) in groups.iter_mut().zip(grads).enumerate() {
            if !active[gi] {
                continue;
            }
            for (k, g) in gs.iter().enumerate() {
                let p = params.tensor_mut(k).data_mut();
                match self.kind {
                    OptimizerKind::Sgd => {
                        for (pi, gi) in p.iter_mut().zip(g.data()) {
                            *pi -= self.lr * scale * gi;
                        }
                    }
                    OptimizerKind::Adam => {
                        let m = self.m[gi].tensor_mut(k).data_mut();
                        let v = self.v[gi].tensor_mut(k).data_mut();
                        for (((pi, gi), mi), vi) in p.iter_mut().zip(g.data()).zip(m).zip(v) {
                            let gs = gi * scale;
                            *mi = BETA1 * *mi + (1.0 - BETA1) * gs;
                            *vi = BETA2 * *vi + (1.0 - BETA2) * gs * gs;
                            *pi -= self.lr * (*mi / bc1) / ((*vi / bc2).sqrt() + ADAM_EPS);
                        }
                    }
                }
            }
        }
        Ok(norm)
    }
}

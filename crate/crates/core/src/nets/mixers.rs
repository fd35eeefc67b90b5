use super::hyper::Hypernetwork;
use super::layers::{relu_in_place, Mlp};
use super::params::ParameterSet;
use crate::diffcore::{dot, Tape, Var};
use crate::error::{Error, Result};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixerKind {
    /// Output is concave in the utilities.
    Concave,
    /// Output is non-decreasing in every utility.
    Monotonic,
}

/// Hypernetwork-conditioned k-layer mixer.
///
/// ```text
/// z1      = W0 x + b0
/// z(i+1)  = relu(Wi [z1..zi] + bi)        i = 1..k-2
/// out     = -/+ W(k-1) [z1..z(k-1)] + b(k-1)
/// ```
///
/// Concave: `W1..W(k-1) >= 0` (absolute heads), `W0` unconstrained, final
/// sign negative. Monotonic: every `Wi >= 0`, final sign positive.
#[derive(Clone, Debug)]
pub struct HyperMixer {
    pub kind: MixerKind,
    pub n_agents: usize,
    pub widths: Vec<usize>,
    pub hyper: Hypernetwork,
    weight_heads: Vec<usize>,
    bias_heads: Vec<usize>,
}

/// Mixer weights generated for one state, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct MixerWeights {
    kind: MixerKind,
    layers: Vec<(Vec<f64>, Vec<f64>, usize, usize)>,
}

impl MixerWeights {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("mixer utility {v}")));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let k = self.layers.len();
        let mut zs: Vec<f64> = Vec::new();
        for (i, (w, b, out, inp)) in self.layers.iter().enumerate() {
            let input: &[f64] = if i == 0 { x } else { &zs };
            debug_assert_eq!(input.len(), *inp);
            let mut z: Vec<f64> = (0..*out)
                .map(|o| dot(&w[o * inp..(o + 1) * inp], input))
                .collect();
            if i == k - 1 {
                let sign = match self.kind {
                    MixerKind::Concave => -1.0,
                    MixerKind::Monotonic => 1.0,
                };
                return sign * z[0] + b[0];
            }
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
            if i > 0 {
                relu_in_place(&mut z);
            }
            zs.extend(z);
        }
        unreachable!("mixer has at least two layers")
    }

    /// Entries of the generated matrices `W1..W(k-1)`.
    pub fn inner_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .skip(1)
            .flat_map(|(w, ..)| w.iter().copied())
    }

    pub fn first_weights(&self) -> &[f64] {
        &self.layers[0].0
    }
}

impl HyperMixer {
    /// `widths` gives the sizes of `z1..z(k-1)`, so `k = widths.len() + 1`.
    pub fn new<R: Rng + ?Sized>(
        kind: MixerKind,
        n_agents: usize,
        state_dim: usize,
        widths: &[usize],
        rng: &mut R,
    ) -> Self {
        assert!(!widths.is_empty(), "mixer needs at least one hidden layer");
        let mut hyper = Hypernetwork::new(state_dim);
        let k = widths.len() + 1;
        let mut weight_heads = Vec::with_capacity(k);
        let mut bias_heads = Vec::with_capacity(k);
        for i in 0..k {
            let out = if i + 1 < k { widths[i] } else { 1 };
            let inp = if i == 0 {
                n_agents
            } else {
                widths[..i].iter().sum()
            };
            let absolute = match kind {
                MixerKind::Concave => i > 0,
                MixerKind::Monotonic => true,
            };
            let fan_scale = 1.0 / (inp as f64).sqrt();
            weight_heads.push(hyper.add_head(
                &format!("w{i}"),
                &[out, inp],
                absolute,
                fan_scale,
                rng,
            ));
            bias_heads.push(hyper.add_head(&format!("b{i}"), &[out], false, 1.0, rng));
        }
        Self {
            kind,
            n_agents,
            widths: widths.to_vec(),
            hyper,
            weight_heads,
            bias_heads,
        }
    }

    pub fn concave<R: Rng + ?Sized>(
        n: usize,
        state_dim: usize,
        widths: &[usize],
        rng: &mut R,
    ) -> Self {
        Self::new(MixerKind::Concave, n, state_dim, widths, rng)
    }

    pub fn monotonic<R: Rng + ?Sized>(
        n: usize,
        state_dim: usize,
        widths: &[usize],
        rng: &mut R,
    ) -> Self {
        Self::new(MixerKind::Monotonic, n, state_dim, widths, rng)
    }

    pub fn params(&self) -> &ParameterSet {
        &self.hyper.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.hyper.params
    }

    pub fn layer_count(&self) -> usize {
        self.weight_heads.len()
    }

    pub fn weight_head(&self, layer: usize) -> usize {
        self.weight_heads[layer]
    }

    pub fn bias_head(&self, layer: usize) -> usize {
        self.bias_heads[layer]
    }

    pub fn weights_with(&self, params: &ParameterSet, state: &[f64]) -> MixerWeights {
        let layers = self
            .weight_heads
            .iter()
            .zip(&self.bias_heads)
            .map(|(&wh, &bh)| {
                let shape = &self.hyper.heads[wh].shape;
                (
                    self.hyper.generate_with(params, wh, state),
                    self.hyper.generate_with(params, bh, state),
                    shape[0],
                    shape[1],
                )
            })
            .collect();
        MixerWeights {
            kind: self.kind,
            layers,
        }
    }

    pub fn weights(&self, state: &[f64]) -> MixerWeights {
        self.weights_with(&self.hyper.params, state)
    }

    /// Plain `Q_tot(utilities; state)`.
    pub fn eval(&self, utilities: &[f64], state: &[f64]) -> Result<f64> {
        self.check_dims(utilities.len(), state.len())?;
        self.weights(state).eval(utilities)
    }

    fn check_dims(&self, n: usize, s: usize) -> Result<()> {
        if n != self.n_agents || s != self.hyper.state_dim {
            return Err(Error::shape(
                "mixer",
                format!(
                    "expected {} utilities and state dim {}, got {n} and {s}",
                    self.n_agents, self.hyper.state_dim
                ),
            ));
        }
        Ok(())
    }

    /// Taped forward; `utilities` is `(n)` and `state` is `(state_dim)`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        state: Var,
        utilities: Var,
    ) -> Result<Var> {
        self.check_dims(tape.value(utilities).len(), tape.value(state).len())?;
        let s = tape.reshape(state, &[1, self.hyper.state_dim])?;
        let x = tape.reshape(utilities, &[1, self.n_agents])?;
        let y = self.forward_batch(tape, vars, s, x)?;
        Ok(tape.sum(y))
    }

    /// Batched forward: `states` is `(rows, state_dim)`, `utilities` is
    /// `(rows, n)`; returns `(rows)`.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        states: Var,
        utilities: Var,
    ) -> Result<Var> {
        let (ss, us) = (tape.value(states).shape(), tape.value(utilities).shape());
        let rows = match (ss, us) {
            ([r, sd], [ru, n]) if r == ru && *sd == self.hyper.state_dim && *n == self.n_agents => {
                *r
            }
            _ => {
                return Err(Error::shape(
                    "mixer",
                    format!(
                    "expected states (rows, {}) and utilities (rows, {}), got {ss:?} and {us:?}",
                    self.hyper.state_dim, self.n_agents
                ),
                ))
            }
        };
        if !tape.value(utilities).all_finite() {
            return Err(Error::NonFinite("mixer utilities".into()));
        }
        let k = self.layer_count();
        let mut zs: Vec<Var> = Vec::with_capacity(k);
        for i in 0..k {
            let w = self
                .hyper
                .forward(tape, vars, self.weight_heads[i], states)?;
            let b = self.hyper.forward(tape, vars, self.bias_heads[i], states)?;
            let input = if i == 0 {
                utilities
            } else if zs.len() == 1 {
                zs[0]
            } else {
                tape.concat_cols(&zs)?
            };
            let lin = tape.bmv(w, input)?;
            if i == k - 1 {
                let signed = match self.kind {
                    MixerKind::Concave => tape.neg(lin),
                    MixerKind::Monotonic => lin,
                };
                let y = tape.add(signed, b)?;
                return tape.reshape(y, &[rows]);
            }
            let z = tape.add(lin, b)?;
            zs.push(if i == 0 { z } else { tape.relu(z) });
        }
        unreachable!("mixer has at least two layers")
    }
}

/// Unrestricted feed-forward estimator `Q*(state, utilities)`.
#[derive(Clone, Debug)]
pub struct UnrestrictedMixer {
    pub params: ParameterSet,
    pub n_agents: usize,
    pub state_dim: usize,
    mlp: Mlp,
}

impl UnrestrictedMixer {
    pub fn new<R: Rng + ?Sized>(
        n_agents: usize,
        state_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let mut params = ParameterSet::new();
        let mlp = Mlp::new(&mut params, "qstar", state_dim + n_agents, hidden, 1, rng);
        Self {
            params,
            n_agents,
            state_dim,
            mlp,
        }
    }

    fn check(&self, n: usize, s: usize) -> Result<()> {
        if n != self.n_agents || s != self.state_dim {
            return Err(Error::shape(
                "unrestricted_mixer",
                format!(
                    "expected {} utilities and state dim {}, got {n} and {s}",
                    self.n_agents, self.state_dim
                ),
            ));
        }
        Ok(())
    }

    pub fn eval_with(
        &self,
        params: &ParameterSet,
        utilities: &[f64],
        state: &[f64],
    ) -> Result<f64> {
        self.check(utilities.len(), state.len())?;
        let mut x = state.to_vec();
        x.extend_from_slice(utilities);
        Ok(self.mlp.apply(params, &x)[0])
    }

    pub fn eval(&self, utilities: &[f64], state: &[f64]) -> Result<f64> {
        self.eval_with(&self.params, utilities, state)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        state: Var,
        utilities: Var,
    ) -> Result<Var> {
        self.check(tape.value(utilities).len(), tape.value(state).len())?;
        let x = tape.concat(&[state, utilities])?;
        let y = self.mlp.forward(tape, vars, x)?;
        Ok(tape.sum(y))
    }

    /// Batched forward over `(rows, state_dim)` and `(rows, n)`; returns
    /// `(rows)`.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        states: Var,
        utilities: Var,
    ) -> Result<Var> {
        let x = tape.concat_cols(&[states, utilities])?;
        let rows = tape.value(x).shape()[0];
        if tape.value(x).shape()[1] != self.state_dim + self.n_agents {
            return Err(Error::shape(
                "unrestricted_mixer",
                format!(
                    "expected {} input columns, got {:?}",
                    self.state_dim + self.n_agents,
                    tape.value(x).shape()
                ),
            ));
        }
        let y = self.mlp.forward(tape, vars, x)?;
        tape.reshape(y, &[rows])
    }

    /// Layer handles, for tests that set weights by hand.
    pub fn layers(&self) -> &[super::layers::Linear] {
        &self.mlp.layers
    }
}

/// One-layer soft critic `q_pi(s, x) = sum_i w_i(s) x_i + b(s)` with
/// `w_i(s) >= 0`.
#[derive(Clone, Debug)]
pub struct SoftCriticMixer {
    pub hyper: Hypernetwork,
    pub n_agents: usize,
    w_head: usize,
    b_head: usize,
}

impl SoftCriticMixer {
    pub fn new<R: Rng + ?Sized>(n_agents: usize, state_dim: usize, rng: &mut R) -> Self {
        let mut hyper = Hypernetwork::new(state_dim);
        let w_head = hyper.add_head("w", &[n_agents], true, 1.0, rng);
        let b_head = hyper.add_head("b", &[1], false, 1.0, rng);
        Self {
            hyper,
            n_agents,
            w_head,
            b_head,
        }
    }

    pub fn params(&self) -> &ParameterSet {
        &self.hyper.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.hyper.params
    }

    pub fn w_head(&self) -> usize {
        self.w_head
    }

    pub fn b_head(&self) -> usize {
        self.b_head
    }

    /// Per-agent weights `w_i(s)`.
    pub fn agent_weights(&self, state: &[f64]) -> Vec<f64> {
        self.hyper.generate(self.w_head, state)
    }

    pub fn eval(&self, inputs: &[f64], state: &[f64]) -> Result<f64> {
        if inputs.len() != self.n_agents || state.len() != self.hyper.state_dim {
            return Err(Error::shape(
                "soft_critic",
                format!("expected {} inputs, got {}", self.n_agents, inputs.len()),
            ));
        }
        let w = self.agent_weights(state);
        let b = self.hyper.generate(self.b_head, state)[0];
        Ok(dot(&w, inputs) + b)
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], state: Var, inputs: Var) -> Result<Var> {
        if tape.value(inputs).len() != self.n_agents {
            return Err(Error::shape(
                "soft_critic",
                format!(
                    "expected {} inputs, got {}",
                    self.n_agents,
                    tape.value(inputs).len()
                ),
            ));
        }
        let w = self.hyper.forward(tape, vars, self.w_head, state)?;
        let b = self.hyper.forward(tape, vars, self.b_head, state)?;
        let wx = tape.mul(w, inputs)?;
        let s = tape.sum(wx);
        let bs = tape.sum(b);
        let both = tape.concat(&[s, bs])?;
        Ok(tape.sum(both))
    }

    /// Generated `(w, b)` for a batch of states: `(rows, n)` and `(rows, 1)`.
    pub fn heads_batch(&self, tape: &mut Tape, vars: &[Var], states: Var) -> Result<(Var, Var)> {
        Ok((
            self.hyper.forward(tape, vars, self.w_head, states)?,
            self.hyper.forward(tape, vars, self.b_head, states)?,
        ))
    }

    /// Batched `q_pi` over `(rows, state_dim)` and `(rows, n)`; returns
    /// `(rows)`.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        states: Var,
        inputs: Var,
    ) -> Result<Var> {
        let (w, b) = self.heads_batch(tape, vars, states)?;
        let wx = tape.mul(w, inputs)?;
        let s = tape.sum_rows(wx)?;
        let rows = tape.value(b).len();
        let b = tape.reshape(b, &[rows])?;
        tape.add(s, b)
    }

    pub fn bias(&self, state: &[f64]) -> f64 {
        self.hyper.generate(self.b_head, state)[0]
    }
}

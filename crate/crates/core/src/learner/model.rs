use super::buffer::{ReplayBuffer, Transition};
use super::config::{Ablation, NetConfig, PolicyInput, TrainConfig};
use super::losses::{agent_alpha, alpha_update, entropy, target_entropy, td_target, weight_fn};
use super::optim::Optimizer;
use crate::actsel::{
    greedy_init, iterative_action_selection, mixer_evaluator, Availability, JointAction, Selection,
    SelectionTrace,
};
use crate::diffcore::{Tape, Tensor, Var};
use crate::envs::EnvInfo;
use crate::error::{Error, Result};
use crate::nets::{
    AgentInputSpec, AgentUtilityNet, Checkpoint, HyperMixer, MixerWeights, ParameterSet, PolicyNet,
    SoftCriticMixer, UnrestrictedMixer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;

/// Names of the trainable parameter groups, in optimizer order.
pub const GROUPS: [&str; 5] = ["utility", "mixer", "qstar", "critic", "policy"];
pub const UTILITY: usize = 0;
pub const MIXER: usize = 1;
pub const QSTAR: usize = 2;
pub const CRITIC: usize = 3;
pub const POLICY: usize = 4;

/// Frozen copies of the utility, mixer and unrestricted networks.
#[derive(Clone, Debug)]
pub struct TargetNetworkPair {
    target: Vec<ParameterSet>,
    pub interval: u64,
    pub episodes_since_copy: u64,
    pub copies: u64,
}

impl TargetNetworkPair {
    pub fn new(online: &[&ParameterSet], interval: u64) -> Self {
        Self {
            target: online.iter().map(|p| (*p).clone()).collect(),
            interval,
            episodes_since_copy: 0,
            copies: 0,
        }
    }

    pub fn target(&self, i: usize) -> &ParameterSet {
        &self.target[i]
    }

    pub fn targets(&self) -> &[ParameterSet] {
        &self.target
    }

    pub fn copy(&mut self, online: &[&ParameterSet]) -> Result<()> {
        for (t, o) in self.target.iter_mut().zip(online) {
            t.copy_from(o)?;
        }
        self.episodes_since_copy = 0;
        self.copies += 1;
        Ok(())
    }

    /// Counts a finished episode and copies once `interval` is reached.
    pub fn on_episode_end(&mut self, online: &[&ParameterSet]) -> Result<bool> {
        self.episodes_since_copy += 1;
        if self.episodes_since_copy >= self.interval {
            self.copy(online)?;
            return Ok(true);
        }
        Ok(false)
    }
}

/// Minibatch with every non-differentiable quantity already resolved:
/// targets, selected joint actions and the policy-loss inputs.
#[derive(Clone, Debug)]
pub struct PreparedBatch {
    pub size: usize,
    pub n_agents: usize,
    pub n_actions: usize,
    /// `(B, state_dim)`
    pub states: Tensor,
    /// `(B * n, input_dim)`
    pub inputs: Tensor,
    pub avail: Vec<bool>,
    /// Executed joint actions, `B * n`.
    pub actions: Vec<usize>,
    /// Selected joint actions at `s`, `B * n`.
    pub uhat: Vec<usize>,
    pub targets: Vec<f64>,
    /// Utilities at `u_hat`, `(B, n)`, detached.
    pub uhat_utilities: Tensor,
    /// Utilities at the executed actions, `(B, n)`, detached.
    pub chosen_utilities: Tensor,
    /// Per-agent action values for the policy loss, `(B * n, A)`.
    pub policy_q: Tensor,
    /// Per-agent temperature repeated over actions, `(B * n, A)`.
    pub alpha_rows: Tensor,
    pub match_rate: f64,
    pub mean_sweeps: f64,
}

/// Parameter handles for one composite-loss evaluation. The soft critic
/// appears twice: frozen inside the policy loss, trainable in its own fit.
pub struct BoundVars<'a> {
    pub utility: &'a [Var],
    pub mixer: &'a [Var],
    pub qstar: &'a [Var],
    pub critic_in_policy: &'a [Var],
    pub critic_fit: &'a [Var],
    pub policy: &'a [Var],
}

#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub policy: Option<Var>,
    pub qstar: Option<Var>,
    pub concaveq: Var,
    /// Regression of the soft critic onto the targets; not part of `total`.
    pub soft_critic: Option<Var>,
    pub total: Var,
    /// `(B * n, A)` policy probabilities, when the policy is active.
    pub probs: Option<Var>,
    /// `(B)` mixer values at the executed actions.
    pub q_tot: Var,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainMetrics {
    pub update: u64,
    pub step: u64,
    pub episode: u64,
    pub loss_policy: f64,
    pub loss_qstar: f64,
    pub loss_concaveq: f64,
    pub loss_soft_critic: f64,
    pub loss_total: f64,
    pub mean_qtot: f64,
    pub mean_target: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Share of states where coordinate ascent kept the greedy init.
    pub match_rate: f64,
    pub mean_sweeps: f64,
    pub grad_norm: f64,
}

/// All networks, target copies, temperature and optimizer state.
#[derive(Clone, Debug)]
pub struct Learner {
    pub info: EnvInfo,
    pub config: TrainConfig,
    pub nets: NetConfig,
    pub ablation: Ablation,
    pub input: AgentInputSpec,
    pub utility: AgentUtilityNet,
    pub mixer: HyperMixer,
    pub qstar: UnrestrictedMixer,
    pub critic: SoftCriticMixer,
    pub policy: PolicyNet,
    pub targets: TargetNetworkPair,
    pub log_alpha: f64,
    pub optimizer: Optimizer,
    pub updates: u64,
}

impl Learner {
    pub fn new(
        info: EnvInfo,
        config: TrainConfig,
        nets: NetConfig,
        ablation: Ablation,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        nets.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = AgentInputSpec {
            obs_dim: info.obs_dim,
            obs_window: config.obs_window,
            n_agents: info.n_agents,
        };
        let utility = AgentUtilityNet::new(input, &nets.agent_hidden, info.n_actions, &mut rng);
        let mixer = HyperMixer::new(
            ablation.mixer,
            info.n_agents,
            info.state_dim,
            &nets.mixer_widths,
            &mut rng,
        );
        let qstar =
            UnrestrictedMixer::new(info.n_agents, info.state_dim, &nets.qstar_hidden, &mut rng);
        let critic = SoftCriticMixer::new(info.n_agents, info.state_dim, &mut rng);
        let policy = PolicyNet::new(input, &nets.policy_hidden, info.n_actions, &mut rng);
        let targets = TargetNetworkPair::new(
            &[&utility.params, mixer.params(), &qstar.params],
            config.target_update_episodes,
        );
        let optimizer = Optimizer::new(
            config.optimizer,
            config.lr,
            config.grad_clip,
            &[
                &utility.params,
                mixer.params(),
                &qstar.params,
                critic.params(),
                &policy.params,
            ],
        );
        Ok(Self {
            info,
            log_alpha: config.log_alpha_init,
            config,
            nets,
            ablation,
            input,
            utility,
            mixer,
            qstar,
            critic,
            policy,
            targets,
            optimizer,
            updates: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn param_sets(&self) -> [&ParameterSet; 5] {
        [
            &self.utility.params,
            self.mixer.params(),
            &self.qstar.params,
            self.critic.params(),
            &self.policy.params,
        ]
    }

    /// Counts a finished training episode; returns whether targets were
    /// refreshed.
    pub fn on_episode_end(&mut self) -> Result<bool> {
        let online = [
            &self.utility.params,
            self.mixer.params(),
            &self.qstar.params,
        ];
        self.targets.on_episode_end(&online)
    }

    pub fn sync_targets(&mut self) -> Result<()> {
        let online = [
            &self.utility.params,
            self.mixer.params(),
            &self.qstar.params,
        ];
        self.targets.copy(&online)
    }

    /// Joint action maximizing the mixer: greedy init plus coordinate
    /// ascent, or greedy init alone when iterative selection is off.
    pub fn select(
        &self,
        weights: &MixerWeights,
        utilities: &[f64],
        avail: &Availability,
    ) -> Result<Selection> {
        self.select_with(
            mixer_evaluator(weights, utilities, avail.n_actions()),
            utilities,
            avail,
        )
    }

    /// Selection against an arbitrary joint-action evaluator.
    pub fn select_with<F>(
        &self,
        mut qtot: F,
        utilities: &[f64],
        avail: &Availability,
    ) -> Result<Selection>
    where
        F: FnMut(&[usize]) -> f64,
    {
        let init = greedy_init(utilities, avail)?;
        if self.ablation.iter_selection {
            return iterative_action_selection(
                qtot,
                &init,
                avail,
                self.config.sweeps(self.info.n_agents),
            );
        }
        let value = qtot(&init.0);
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("Q_tot at {:?}", init.0)));
        }
        Ok(Selection {
            action: init.clone(),
            value,
            trace: SelectionTrace {
                initial_value: value,
                sweep_values: Vec::new(),
                final_action: init,
                sweeps_used: 0,
                evaluations: 1,
            },
        })
    }

    fn pick(utilities: &[f64], actions: &[usize], n_actions: usize) -> Vec<f64> {
        actions
            .iter()
            .enumerate()
            .map(|(i, &a)| utilities[i * n_actions + a])
            .collect()
    }

    /// Resolves targets, selections and policy-loss inputs for a batch.
    pub fn prepare(&self, batch: &[Transition]) -> Result<PreparedBatch> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (n, a, sd) = (self.info.n_agents, self.info.n_actions, self.info.state_dim);
        let b = batch.len();
        let in_dim = self.input.input_dim();
        let alpha = self.alpha();
        let mut states = Vec::with_capacity(b * sd);
        let mut inputs = Vec::with_capacity(b * n * in_dim);
        let mut avail_all = Vec::with_capacity(b * n * a);
        let mut actions = Vec::with_capacity(b * n);
        let mut uhat = Vec::with_capacity(b * n);
        let mut targets = Vec::with_capacity(b);
        let mut uhat_u = Vec::with_capacity(b * n);
        let mut chosen_u = Vec::with_capacity(b * n);
        let mut policy_q = Vec::with_capacity(b * n * a);
        let mut alpha_rows = Vec::with_capacity(b * n * a);
        let (mut matches, mut sweeps) = (0usize, 0usize);

        for tr in batch {
            // target side
            let y = if tr.terminal {
                td_target(tr.reward, true, self.config.gamma, 0.0)?
            } else {
                let next_u = self
                    .utility
                    .utilities_with(self.targets.target(UTILITY), &tr.next_inputs);
                let w = self
                    .mixer
                    .weights_with(self.targets.target(MIXER), &tr.next_state);
                let next_avail = Availability::new(a, tr.next_avail.clone())?;
                let sel = self.select(&w, &next_u, &next_avail)?;
                let next_value = if self.ablation.central_qstar {
                    let x = Self::pick(&next_u, &sel.action.0, a);
                    self.qstar
                        .eval_with(self.targets.target(QSTAR), &x, &tr.next_state)?
                } else {
                    sel.value
                };
                td_target(tr.reward, false, self.config.gamma, next_value)?
            };
            targets.push(y);

            // online side
            let util = self.utility.utilities(&tr.inputs);
            let w = self.mixer.weights(&tr.state);
            let avail = Availability::new(a, tr.avail.clone())?;
            let init = greedy_init(&util, &avail)?;
            // joint action -> Q_tot, shared by selection and the policy inputs
            let mut memo: HashMap<Vec<usize>, f64> = HashMap::new();
            let mut raw = mixer_evaluator(&w, &util, a);
            let mut qtot = |u: &[usize]| -> f64 {
                if let Some(&v) = memo.get(u) {
                    return v;
                }
                let v = raw(u);
                memo.insert(u.to_vec(), v);
                v
            };
            let sel = self.select_with(&mut qtot, &util, &avail)?;
            if sel.action == init {
                matches += 1;
            }
            sweeps += sel.trace.sweeps_used;
            let xu = Self::pick(&util, &sel.action.0, a);
            uhat_u.extend_from_slice(&xu);
            chosen_u.extend(Self::pick(&util, &tr.actions, a));
            uhat.extend_from_slice(&sel.action.0);

            if self.ablation.soft_policy {
                let cw = self.critic.agent_weights(&tr.state);
                for i in 0..n {
                    let ai = agent_alpha(alpha, cw[i]);
                    alpha_rows.extend(std::iter::repeat_n(ai, a));
                    for act in 0..a {
                        let v = if !avail.is_available(i, act) {
                            0.0
                        } else {
                            match self.config.policy_input {
                                PolicyInput::Utility => util[i * a + act],
                                PolicyInput::Counterfactual => {
                                    let mut u = sel.action.0.clone();
                                    u[i] = act;
                                    let v = qtot(&u);
                                    if !v.is_finite() {
                                        return Err(Error::NonFinite(format!(
                                            "Q_tot at {u:?} is {v}"
                                        )));
                                    }
                                    v
                                }
                            }
                        };
                        policy_q.push(v);
                    }
                }
            } else {
                policy_q.extend(std::iter::repeat_n(0.0, n * a));
                alpha_rows.extend(std::iter::repeat_n(0.0, n * a));
            }

            states.extend_from_slice(&tr.state);
            inputs.extend_from_slice(&tr.inputs);
            avail_all.extend_from_slice(&tr.avail);
            actions.extend_from_slice(&tr.actions);
        }

        Ok(PreparedBatch {
            size: b,
            n_agents: n,
            n_actions: a,
            states: Tensor::matrix(b, sd, states)?,
            inputs: Tensor::matrix(b * n, in_dim, inputs)?,
            avail: avail_all,
            actions,
            uhat,
            targets,
            uhat_utilities: Tensor::matrix(b, n, uhat_u)?,
            chosen_utilities: Tensor::matrix(b, n, chosen_u)?,
            policy_q: Tensor::matrix(b * n, a, policy_q)?,
            alpha_rows: Tensor::matrix(b * n, a, alpha_rows)?,
            match_rate: matches as f64 / b as f64,
            mean_sweeps: sweeps as f64 / b as f64,
        })
    }

    fn mean_sq(tape: &mut Tape, pred: Var, y: Var, weights: Option<Var>) -> Result<Var> {
        let rows = tape.value(pred).len() as f64;
        let d = tape.sub(pred, y)?;
        let mut sq = tape.mul(d, d)?;
        if let Some(w) = weights {
            sq = tape.mul(sq, w)?;
        }
        let s = tape.sum(sq);
        Ok(tape.scale(s, 1.0 / rows))
    }

    /// Builds `L_pi + L_Q* + L_ConcaveQ` (plus the separate soft-critic
    /// fit) on `tape`.
    pub fn build_losses(
        &self,
        tape: &mut Tape,
        vars: &BoundVars,
        p: &PreparedBatch,
    ) -> Result<LossVars> {
        let (b, n, a) = (p.size, p.n_agents, p.n_actions);
        let states = tape.constant(p.states.clone());
        let inputs = tape.constant(p.inputs.clone());
        let y = tape.constant(Tensor::vector(p.targets.clone()));

        let util = self.utility.forward(tape, vars.utility, inputs)?;
        let idx: Vec<usize> = p
            .actions
            .iter()
            .enumerate()
            .map(|(k, &u)| k * a + u)
            .collect();
        let chosen = tape.gather(util, &idx)?;
        let chosen = tape.reshape(chosen, &[b, n])?;
        let q_tot = self.mixer.forward_batch(tape, vars.mixer, states, chosen)?;
        let w: Vec<f64> = tape
            .value(q_tot)
            .data()
            .iter()
            .zip(&p.targets)
            .map(|(q, t)| weight_fn(*q, *t, self.config.w_nonoptimal))
            .collect();
        let w = tape.constant(Tensor::vector(w));
        let concaveq = Self::mean_sq(tape, q_tot, y, Some(w))?;
        let mut total = concaveq;

        let qstar = if self.ablation.central_qstar {
            let x = tape.constant(p.uhat_utilities.clone());
            let q = self.qstar.forward_batch(tape, vars.qstar, states, x)?;
            let l = Self::mean_sq(tape, q, y, None)?;
            total = tape.add(total, l)?;
            Some(l)
        } else {
            None
        };

        let (policy, soft_critic, probs) = if self.ablation.soft_policy {
            let (probs, logp) = self.policy.forward(tape, vars.policy, inputs, &p.avail)?;
            let alpha = tape.constant(p.alpha_rows.clone());
            let q = tape.constant(p.policy_q.clone());
            let ent = tape.mul(alpha, logp)?;
            let inner = tape.sub(q, ent)?;
            let weighted = tape.mul(probs, inner)?;
            let x = tape.sum_rows(weighted)?;
            let x = tape.reshape(x, &[b, n])?;
            let qpi = self
                .critic
                .forward_batch(tape, vars.critic_in_policy, states, x)?;
            let s = tape.sum(qpi);
            let l = tape.scale(s, -1.0 / b as f64);
            total = tape.add(total, l)?;

            let xc = tape.constant(p.chosen_utilities.clone());
            let fit = self
                .critic
                .forward_batch(tape, vars.critic_fit, states, xc)?;
            let sc = Self::mean_sq(tape, fit, y, None)?;
            (Some(l), Some(sc), Some(probs))
        } else {
            (None, None, None)
        };

        Ok(LossVars {
            policy,
            qstar,
            concaveq,
            soft_critic,
            total,
            probs,
            q_tot,
        })
    }

    /// One optimization step on a sampled minibatch. An underfull buffer
    /// yields the retryable [`Error::BufferUnderfull`].
    pub fn train_step(
        &mut self,
        buffer: &mut ReplayBuffer,
        step: u64,
        episode: u64,
        epsilon: f64,
    ) -> Result<TrainMetrics> {
        let batch = buffer.sample(self.config.batch)?;
        let prepared = self.prepare(&batch)?;
        let ab = self.ablation;

        let mut tape = Tape::new();
        let uv = self.utility.params.bind(&mut tape, true);
        let mv = self.mixer.params().bind(&mut tape, true);
        let qv = self.qstar.params.bind(&mut tape, ab.central_qstar);
        let cpv = self.critic.params().bind(&mut tape, false);
        let cfv = self.critic.params().bind(&mut tape, ab.soft_policy);
        let pv = self.policy.params.bind(&mut tape, ab.soft_policy);
        let vars = BoundVars {
            utility: &uv,
            mixer: &mv,
            qstar: &qv,
            critic_in_policy: &cpv,
            critic_fit: &cfv,
            policy: &pv,
        };
        let losses = self.build_losses(&mut tape, &vars, &prepared)?;
        let value = |v: Option<Var>| v.map_or(0.0, |v| tape.scalar_value(v));
        let metrics_losses = [
            ("loss_policy", value(losses.policy)),
            ("loss_qstar", value(losses.qstar)),
            ("loss_concaveq", tape.scalar_value(losses.concaveq)),
            ("loss_soft_critic", value(losses.soft_critic)),
            ("loss_total", tape.scalar_value(losses.total)),
        ];
        if let Some((name, v)) = metrics_losses.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{name} = {v} at update {}",
                self.updates
            )));
        }

        let objective = match losses.soft_critic {
            Some(sc) => tape.add(losses.total, sc)?,
            None => losses.total,
        };
        let mut grads = tape.backward(objective)?;
        let take = |g: &mut crate::diffcore::Gradients, vs: &[Var]| -> Vec<Tensor> {
            vs.iter().map(|v| g.take(*v)).collect()
        };
        let g = vec![
            take(&mut grads, &uv),
            take(&mut grads, &mv),
            take(&mut grads, &qv),
            take(&mut grads, &cfv),
            take(&mut grads, &pv),
        ];

        let entropies: Vec<(f64, f64)> = match losses.probs {
            Some(pr) => {
                let a = prepared.n_actions;
                tape.value(pr)
                    .data()
                    .chunks(a)
                    .zip(prepared.avail.chunks(a))
                    .map(|(row, m)| {
                        (
                            entropy(row),
                            target_entropy(m.iter().filter(|&&x| x).count()),
                        )
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        let q_tot = tape.value(losses.q_tot).data();
        let mean_qtot = q_tot.iter().sum::<f64>() / q_tot.len() as f64;

        let active = [true, true, ab.central_qstar, ab.soft_policy, ab.soft_policy];
        let grad_norm = self.optimizer.step(
            &mut [
                &mut self.utility.params,
                self.mixer.params_mut(),
                &mut self.qstar.params,
                self.critic.params_mut(),
                &mut self.policy.params,
            ],
            &g,
            &active,
        )?;
        if ab.soft_policy {
            self.log_alpha = alpha_update(self.log_alpha, self.config.lr_alpha, &entropies);
        }
        self.updates += 1;

        Ok(TrainMetrics {
            update: self.updates,
            step,
            episode,
            loss_policy: metrics_losses[0].1,
            loss_qstar: metrics_losses[1].1,
            loss_concaveq: metrics_losses[2].1,
            loss_soft_critic: metrics_losses[3].1,
            loss_total: metrics_losses[4].1,
            mean_qtot,
            mean_target: prepared.targets.iter().sum::<f64>() / prepared.size as f64,
            alpha: self.alpha(),
            epsilon,
            match_rate: prepared.match_rate,
            mean_sweeps: prepared.mean_sweeps,
            grad_norm,
        })
    }

    /// Decentralized action choice from `(n, input_dim)` rows. With
    /// `explore`, each agent acts uniformly at random with probability
    /// `epsilon` and otherwise samples its policy; without it, each agent
    /// takes its policy's argmax. Without a soft policy the utilities
    /// stand in (epsilon-greedy / argmax).
    pub fn act<R: Rng + ?Sized>(
        &self,
        inputs: &[f64],
        avail: &Availability,
        epsilon: f64,
        explore: bool,
        rng: &mut R,
    ) -> Result<JointAction> {
        let a = self.info.n_actions;
        let scores = if self.ablation.soft_policy {
            self.policy.probs(inputs, avail.as_slice())?
        } else {
            self.utility.utilities(inputs)
        };
        let mut actions = Vec::with_capacity(avail.n_agents());
        for i in 0..avail.n_agents() {
            let options: Vec<usize> = (0..a).filter(|&j| avail.is_available(i, j)).collect();
            if options.is_empty() {
                return Err(Error::NoAvailableAction(i));
            }
            let row = &scores[i * a..(i + 1) * a];
            let argmax =
                options.iter().copied().fold(
                    options[0],
                    |best, j| if row[j] > row[best] { j } else { best },
                );
            let choice = if !explore {
                argmax
            } else if rng.gen::<f64>() < epsilon {
                options[rng.gen_range(0..options.len())]
            } else if self.ablation.soft_policy {
                let mut u = rng.gen::<f64>();
                let mut pick = *options.last().expect("non-empty");
                for &j in &options {
                    if u < row[j] {
                        pick = j;
                        break;
                    }
                    u -= row[j];
                }
                pick
            } else {
                argmax
            };
            actions.push(choice);
        }
        Ok(JointAction(actions))
    }

    /// Network, target, optimizer and temperature state.
    pub fn checkpoint(&self, meta: impl Into<String>) -> Checkpoint {
        let mut ck = Checkpoint::new(meta);
        for (name, p) in GROUPS.iter().zip(self.param_sets()) {
            ck.add(*name, p.clone());
        }
        for (name, p) in GROUPS.iter().zip(self.targets.targets()) {
            ck.add(format!("target.{name}"), p.clone());
        }
        for (i, (m, v)) in self.optimizer.m.iter().zip(&self.optimizer.v).enumerate() {
            ck.add(format!("adam.m.{}", GROUPS[i]), m.clone());
            ck.add(format!("adam.v.{}", GROUPS[i]), v.clone());
        }
        let mut state = ParameterSet::new();
        for (name, v) in [
            ("log_alpha", self.log_alpha),
            ("optimizer_t", self.optimizer.t as f64),
            ("updates", self.updates as f64),
            (
                "episodes_since_copy",
                self.targets.episodes_since_copy as f64,
            ),
            ("target_copies", self.targets.copies as f64),
        ] {
            state.push(name, Tensor::scalar(v));
        }
        ck.add("state", state);
        ck
    }

    /// Loads state saved by [`Learner::checkpoint`] into a learner built
    /// with the same configuration.
    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        let load = |dst: &mut ParameterSet, name: &str| -> Result<()> {
            dst.copy_from(ck.section(name)?).map_err(|_| {
                Error::Checkpoint(format!(
                    "section {name} does not match the configured network"
                ))
            })
        };
        load(&mut self.utility.params, GROUPS[UTILITY])?;
        load(self.mixer.params_mut(), GROUPS[MIXER])?;
        load(&mut self.qstar.params, GROUPS[QSTAR])?;
        load(self.critic.params_mut(), GROUPS[CRITIC])?;
        load(&mut self.policy.params, GROUPS[POLICY])?;
        for (i, t) in self.targets.target.iter_mut().enumerate() {
            load(t, &format!("target.{}", GROUPS[i]))?;
        }
        for ((m, v), group) in self
            .optimizer
            .m
            .iter_mut()
            .zip(&mut self.optimizer.v)
            .zip(GROUPS)
        {
            load(m, &format!("adam.m.{group}"))?;
            load(v, &format!("adam.v.{group}"))?;
        }
        let state = ck.section("state")?;
        let get = |name: &str| -> Result<f64> {
            state
                .get(name)
                .map(Tensor::item)
                .ok_or_else(|| Error::Checkpoint(format!("missing state entry {name}")))
        };
        self.log_alpha = get("log_alpha")?;
        self.optimizer.t = get("optimizer_t")? as u64;
        self.updates = get("updates")? as u64;
        self.targets.episodes_since_copy = get("episodes_since_copy")? as u64;
        self.targets.copies = get("target_copies")? as u64;
        Ok(())
    }
}

use crate::error::{Error, Result};
use crate::nets::AgentInputSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// One stored episode. Per-step arrays hold `T + 1` entries (the final
/// observation included), per-transition arrays hold `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub n_agents: usize,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub state_dim: usize,
    pub obs: Vec<f64>,
    pub states: Vec<f64>,
    pub avail: Vec<bool>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl EpisodeRecord {
    pub fn start(obs: &[Vec<f64>], state: &[f64], avail: &[bool], n_actions: usize) -> Self {
        Self {
            n_agents: obs.len(),
            obs_dim: obs.first().map_or(0, Vec::len),
            n_actions,
            state_dim: state.len(),
            obs: obs.concat(),
            states: state.to_vec(),
            avail: avail.to_vec(),
            actions: Vec::new(),
            rewards: Vec::new(),
            terminal: Vec::new(),
        }
    }

    /// Appends a transition and the observation that followed it.
    pub fn push(
        &mut self,
        actions: &[usize],
        reward: f64,
        terminal: bool,
        obs: &[Vec<f64>],
        state: &[f64],
        avail: &[bool],
    ) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::NonFinite(format!("reward {reward}")));
        }
        if actions.len() != self.n_agents || avail.len() != self.n_agents * self.n_actions {
            return Err(Error::InvalidArgument(
                "transition does not match episode layout".into(),
            ));
        }
        self.actions.extend_from_slice(actions);
        self.rewards.push(reward);
        self.terminal.push(terminal);
        for o in obs {
            self.obs.extend_from_slice(o);
        }
        self.states.extend_from_slice(state);
        self.avail.extend_from_slice(avail);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    fn obs_at(&self, t: usize, agent: usize) -> &[f64] {
        let base = (t * self.n_agents + agent) * self.obs_dim;
        &self.obs[base..base + self.obs_dim]
    }

    /// Network input rows `(n, input_dim)` for step `t`: the last
    /// `obs_window` observations, zero-padded before the episode start.
    pub fn inputs_at(&self, spec: &AgentInputSpec, t: usize) -> Vec<f64> {
        let zeros = vec![0.0; self.obs_dim];
        let k = spec.obs_window;
        let mut rows = Vec::with_capacity(self.n_agents * spec.input_dim());
        for agent in 0..self.n_agents {
            let window: Vec<&[f64]> = (0..k)
                .map(|j| {
                    let back = k - 1 - j;
                    if back > t {
                        &zeros[..]
                    } else {
                        self.obs_at(t - back, agent)
                    }
                })
                .collect();
            rows.extend(spec.row(agent, &window));
        }
        rows
    }

    pub fn transition(&self, spec: &AgentInputSpec, t: usize) -> Transition {
        let (n, a, sd) = (self.n_agents, self.n_actions, self.state_dim);
        Transition {
            state: self.states[t * sd..(t + 1) * sd].to_vec(),
            next_state: self.states[(t + 1) * sd..(t + 2) * sd].to_vec(),
            inputs: self.inputs_at(spec, t),
            next_inputs: self.inputs_at(spec, t + 1),
            avail: self.avail[t * n * a..(t + 1) * n * a].to_vec(),
            next_avail: self.avail[(t + 1) * n * a..(t + 2) * n * a].to_vec(),
            actions: self.actions[t * n..(t + 1) * n].to_vec(),
            reward: self.rewards[t],
            terminal: self.terminal[t],
        }
    }
}

/// `(s, tau, u, r, s', tau')` with availability masks for both steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub next_state: Vec<f64>,
    /// `(n, input_dim)` rows built from the observation window.
    pub inputs: Vec<f64>,
    pub next_inputs: Vec<f64>,
    pub avail: Vec<bool>,
    pub next_avail: Vec<bool>,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub terminal: bool,
}

/// Ring of episodes bounded by a transition count, sampled uniformly over
/// transitions with its own seeded stream.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    spec: AgentInputSpec,
    episodes: VecDeque<EpisodeRecord>,
    transitions: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, spec: AgentInputSpec, seed: u64) -> Self {
        Self {
            capacity,
            spec,
            episodes: VecDeque::new(),
            transitions: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stored transitions.
    pub fn len(&self) -> usize {
        self.transitions
    }

    pub fn is_empty(&self) -> bool {
        self.transitions == 0
    }

    pub fn episodes(&self) -> usize {
        self.episodes.len()
    }

    /// Adds an episode, evicting the oldest ones beyond capacity. An
    /// episode longer than the whole capacity is truncated from the front.
    pub fn push(&mut self, episode: EpisodeRecord) {
        if episode.is_empty() {
            return;
        }
        self.transitions += episode.len();
        self.episodes.push_back(episode);
        while self.transitions > self.capacity && self.episodes.len() > 1 {
            let old = self.episodes.pop_front().expect("non-empty");
            self.transitions -= old.len();
        }
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (e, ep) in self.episodes.iter().enumerate() {
            if index < ep.len() {
                return (e, index);
            }
            index -= ep.len();
        }
        unreachable!("index within stored transitions")
    }

    /// Uniform sample with replacement. Underfull buffers give the
    /// retryable [`Error::BufferUnderfull`].
    pub fn sample(&mut self, batch: usize) -> Result<Vec<Transition>> {
        let usable = self.transitions.min(self.capacity);
        if usable < batch || batch == 0 {
            return Err(Error::BufferUnderfull {
                have: self.transitions,
                need: batch.max(1),
            });
        }
        // with one oversized episode only its last `capacity` steps count
        let skip = self.transitions - usable;
        let mut idx: Vec<usize> = (0..batch)
            .map(|_| skip + self.rng.gen_range(0..usable))
            .collect();
        idx.sort_unstable();
        Ok(idx
            .into_iter()
            .map(|i| {
                let (e, t) = self.locate(i);
                self.episodes[e].transition(&self.spec, t)
            })
            .collect())
    }
}

use super::buffer::{EpisodeRecord, ReplayBuffer};
use super::losses::epsilon;
use super::model::{Learner, TrainMetrics};
use crate::envs::MultiAgentEnv;
use crate::error::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::VecDeque;

const RECENT_EPISODES: usize = 20;

/// Seed of episode `index` in stream `stream` of a run seeded with `seed`.
pub fn episode_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a mixed key
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalSummary {
    pub step: u64,
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub returns: Vec<f64>,
    /// Share of episodes whose first joint action equals the known optimum,
    /// when the environment has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_rate: Option<f64>,
    /// First joint action of each episode.
    pub first_actions: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub step: u64,
    pub episode: u64,
    pub length: usize,
    pub episode_return: f64,
    pub mean_return: f64,
    pub epsilon: f64,
    pub target_copied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricsRecord {
    Episode(EpisodeMetrics),
    Train(TrainMetrics),
    Eval(EvalSummary),
}

/// Runs one episode and returns its record. `explore` selects the training
/// behaviour policy; otherwise actions are greedy and `rng` is unused.
pub fn run_episode(
    learner: &Learner,
    env: &mut dyn MultiAgentEnv,
    seed: u64,
    eps: f64,
    explore: bool,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeRecord> {
    env.reset(seed);
    let a = learner.info.n_actions;
    let mut ep = EpisodeRecord::start(
        &env.observations(),
        &env.state(),
        env.availability().as_slice(),
        a,
    );
    for t in 0.. {
        let avail = env.availability();
        let inputs = ep.inputs_at(&learner.input, t);
        let u = learner.act(&inputs, &avail, eps, explore, rng)?;
        let out = env.step(&u.0)?;
        let next_avail = env.availability();
        ep.push(
            &u.0,
            out.reward,
            out.done,
            &env.observations(),
            &env.state(),
            next_avail.as_slice(),
        )?;
        if out.done {
            break;
        }
    }
    Ok(ep)
}

/// Greedy evaluation over `episodes` seeded episodes.
pub fn evaluate(
    learner: &Learner,
    env: &mut dyn MultiAgentEnv,
    episodes: usize,
    seed: u64,
    optimum: Option<&[usize]>,
) -> Result<EvalSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(episodes);
    let mut first_actions = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let ep = run_episode(
            learner,
            env,
            episode_seed(seed, 1, e as u64),
            0.0,
            false,
            &mut rng,
        )?;
        returns.push(ep.total_reward());
        first_actions.push(ep.actions[..learner.info.n_agents].to_vec());
    }
    let n = episodes.max(1) as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let optimal_rate =
        optimum.map(|opt| first_actions.iter().filter(|u| u.as_slice() == opt).count() as f64 / n);
    Ok(EvalSummary {
        step: 0,
        episodes,
        mean_return: mean,
        std_return: var.sqrt(),
        returns,
        optimal_rate,
        first_actions,
    })
}

/// Environment interaction, replay and update schedule of a training run.
pub struct Trainer {
    pub learner: Learner,
    pub env: Box<dyn MultiAgentEnv>,
    pub buffer: ReplayBuffer,
    pub seed: u64,
    pub steps: u64,
    pub episodes: u64,
    /// Known optimal joint action for evaluation reports.
    pub optimum: Option<Vec<usize>>,
    rng: ChaCha8Rng,
    recent: VecDeque<f64>,
    next_eval: u64,
    evals: u64,
}

impl Trainer {
    pub fn new(learner: Learner, env: Box<dyn MultiAgentEnv>, seed: u64) -> Self {
        let buffer = ReplayBuffer::new(
            learner.config.buffer_capacity,
            learner.input,
            episode_seed(seed, 2, 0),
        );
        let next_eval = learner.config.eval_interval_steps;
        Self {
            learner,
            env,
            buffer,
            seed,
            steps: 0,
            episodes: 0,
            optimum: None,
            rng: ChaCha8Rng::seed_from_u64(episode_seed(seed, 3, 0)),
            recent: VecDeque::new(),
            next_eval,
            evals: 0,
        }
    }

    pub fn with_optimum(mut self, optimum: Vec<usize>) -> Self {
        self.optimum = Some(optimum);
        self
    }

    pub fn epsilon(&self) -> f64 {
        epsilon(&self.learner.config, self.steps)
    }

    pub fn evaluate(&mut self) -> Result<EvalSummary> {
        let seed = episode_seed(self.seed, 4, self.evals);
        self.evals += 1;
        let mut s = evaluate(
            &self.learner,
            self.env.as_mut(),
            self.learner.config.eval_episodes,
            seed,
            self.optimum.as_deref(),
        )?;
        s.step = self.steps;
        Ok(s)
    }

    /// One exploring episode followed by its scheduled updates.
    pub fn train_episode(
        &mut self,
        sink: &mut dyn FnMut(&MetricsRecord) -> Result<()>,
    ) -> Result<()> {
        let eps = self.epsilon();
        let seed = episode_seed(self.seed, 0, self.episodes);
        let ep = run_episode(
            &self.learner,
            self.env.as_mut(),
            seed,
            eps,
            true,
            &mut self.rng,
        )?;
        self.steps += ep.len() as u64;
        self.episodes += 1;
        let ret = ep.total_reward();
        let length = ep.len();
        self.buffer.push(ep);
        let copied = self.learner.on_episode_end()?;
        self.recent.push_back(ret);
        if self.recent.len() > RECENT_EPISODES {
            self.recent.pop_front();
        }
        sink(&MetricsRecord::Episode(EpisodeMetrics {
            step: self.steps,
            episode: self.episodes,
            length,
            episode_return: ret,
            mean_return: self.recent.iter().sum::<f64>() / self.recent.len() as f64,
            epsilon: eps,
            target_copied: copied,
        }))?;
        for _ in 0..self.learner.config.updates_per_episode {
            match self
                .learner
                .train_step(&mut self.buffer, self.steps, self.episodes, eps)
            {
                Ok(m) => sink(&MetricsRecord::Train(m))?,
                Err(e) if e.is_retryable() => break,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    /// Trains until `total_steps` environment steps, evaluating every
    /// `eval_interval_steps` and once more at the end. Returns the final
    /// evaluation.
    pub fn run(
        &mut self,
        sink: &mut dyn FnMut(&MetricsRecord) -> Result<()>,
    ) -> Result<EvalSummary> {
        self.run_with(sink, &mut |_| Ok(()))
    }

    /// [`Trainer::run`] with a callback after every training episode.
    pub fn run_with(
        &mut self,
        sink: &mut dyn FnMut(&MetricsRecord) -> Result<()>,
        after_episode: &mut dyn FnMut(&Trainer) -> Result<()>,
    ) -> Result<EvalSummary> {
        let total = self.learner.config.total_steps;
        while self.steps < total {
            self.train_episode(sink)?;
            after_episode(self)?;
            if self.steps >= self.next_eval && self.steps < total {
                while self.next_eval <= self.steps {
                    self.next_eval += self.learner.config.eval_interval_steps;
                }
                let s = self.evaluate()?;
                sink(&MetricsRecord::Eval(s))?;
            }
        }
        let last = self.evaluate()?;
        sink(&MetricsRecord::Eval(last.clone()))?;
        Ok(last)
    }
}

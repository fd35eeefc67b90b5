use super::MultiAgentEnv;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub done: bool,
}

/// Seed plus the action sequence of one episode, with the observed rewards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub steps: Vec<TraceStep>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    seed: u64,
    steps: usize,
}

impl EpisodeTrace {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            steps: Vec::new(),
        }
    }

    /// Runs `policy` from `reset(seed)` until the episode ends.
    pub fn record<E, P>(env: &mut E, seed: u64, mut policy: P) -> Result<Self>
    where
        E: MultiAgentEnv + ?Sized,
        P: FnMut(&E, usize) -> Vec<usize>,
    {
        env.reset(seed);
        let mut trace = Self::new(seed);
        for t in 0..env.info().episode_limit {
            let actions = policy(env, t);
            let out = env.step(&actions)?;
            trace.steps.push(TraceStep {
                t,
                actions,
                reward: out.reward,
                done: out.done,
            });
            if out.done {
                break;
            }
        }
        Ok(trace)
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    /// Replays the recorded actions and returns the rewards observed now.
    pub fn replay<E: MultiAgentEnv + ?Sized>(&self, env: &mut E) -> Result<Vec<f64>> {
        env.reset(self.seed);
        let mut rewards = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            rewards.push(env.step(&step.actions)?.reward);
        }
        Ok(rewards)
    }

    /// Header line followed by one line per step.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(
            &mut w,
            &Header {
                seed: self.seed,
                steps: self.steps.len(),
            },
        )?;
        writeln!(w)?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header: Header = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(Error::InvalidArgument("empty trace".into())),
        };
        let mut steps = Vec::with_capacity(header.steps);
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                steps.push(serde_json::from_str(&line)?);
            }
        }
        if steps.len() != header.steps {
            return Err(Error::InvalidArgument(format!(
                "trace header announces {} steps, found {}",
                header.steps,
                steps.len()
            )));
        }
        Ok(Self {
            seed: header.seed,
            steps,
        })
    }
}

use super::{EnvInfo, MultiAgentEnv, StepOutput};
use crate::actsel::Availability;
use crate::error::{Error, Result};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const STAY: usize = 0;
pub const UP: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;
pub const RIGHT: usize = 4;
pub const CATCH: usize = 5;
pub const N_ACTIONS: usize = 6;

/// Observation window side length.
pub const VIEW: usize = 5;
pub const OBS_DIM: usize = 2 * VIEW * VIEW;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredatorPreyConfig {
    pub grid: usize,
    pub predators: usize,
    pub prey: usize,
    /// Reward added for each catch that takes part in no capture.
    pub penalty: f64,
    pub capture_reward: f64,
    pub episode_limit: usize,
}

impl Default for PredatorPreyConfig {
    fn default() -> Self {
        Self {
            grid: 10,
            predators: 8,
            prey: 8,
            penalty: 0.0,
            capture_reward: 10.0,
            episode_limit: 200,
        }
    }
}

type Cell = (usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct PredatorPreyState {
    pub predators: Vec<Option<Cell>>,
    pub prey: Vec<Option<Cell>>,
    pub step: usize,
}

/// Grid-world pursuit with coordinated catches.
///
/// Per step: catches are resolved on the pre-step layout, survivors' prey
/// move next, then predators move in a random priority order.
#[derive(Clone, Debug)]
pub struct PredatorPrey {
    pub config: PredatorPreyConfig,
    state: PredatorPreyState,
    rng: ChaCha8Rng,
}

fn neighbour(cell: Cell, action: usize, grid: usize) -> Option<Cell> {
    let (r, c) = cell;
    match action {
        UP if r > 0 => Some((r - 1, c)),
        DOWN if r + 1 < grid => Some((r + 1, c)),
        LEFT if c > 0 => Some((r, c - 1)),
        RIGHT if c + 1 < grid => Some((r, c + 1)),
        _ => None,
    }
}

fn adjacent(a: Cell, b: Cell) -> bool {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1
}

impl PredatorPrey {
    pub fn new(config: PredatorPreyConfig) -> Result<Self> {
        let cells = config.grid * config.grid;
        if config.predators + config.prey > cells || config.predators == 0 {
            return Err(Error::InvalidArgument(format!(
                "{} predators and {} prey do not fit a {}x{} grid",
                config.predators, config.prey, config.grid, config.grid
            )));
        }
        let mut env = Self {
            state: PredatorPreyState {
                predators: vec![None; config.predators],
                prey: vec![None; config.prey],
                step: 0,
            },
            rng: ChaCha8Rng::seed_from_u64(0),
            config,
        };
        env.pp_reset(0);
        Ok(env)
    }

    pub fn state_ref(&self) -> &PredatorPreyState {
        &self.state
    }

    /// Places every entity on a distinct uniformly random cell.
    pub fn pp_reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.config.grid;
        let total = self.config.predators + self.config.prey;
        let picks = index::sample(&mut self.rng, g * g, total).into_vec();
        let to_cell = |i: usize| Some((i / g, i % g));
        self.state = PredatorPreyState {
            predators: picks[..self.config.predators]
                .iter()
                .map(|&i| to_cell(i))
                .collect(),
            prey: picks[self.config.predators..]
                .iter()
                .map(|&i| to_cell(i))
                .collect(),
            step: 0,
        };
    }

    /// Directly installs a layout; used by tests and examples.
    pub fn set_layout(&mut self, predators: Vec<Option<Cell>>, prey: Vec<Option<Cell>>) {
        assert_eq!(predators.len(), self.config.predators);
        assert_eq!(prey.len(), self.config.prey);
        self.state.predators = predators;
        self.state.prey = prey;
    }

    fn occupied(&self, cell: Cell) -> bool {
        self.state
            .predators
            .iter()
            .chain(&self.state.prey)
            .any(|e| *e == Some(cell))
    }

    pub fn live_predators(&self) -> usize {
        self.state.predators.iter().filter(|p| p.is_some()).count()
    }

    pub fn live_prey(&self) -> usize {
        self.state.prey.iter().filter(|p| p.is_some()).count()
    }

    pub fn agent_availability(&self, agent: usize) -> [bool; N_ACTIONS] {
        let mut mask = [false; N_ACTIONS];
        mask[STAY] = true;
        let Some(cell) = self.state.predators[agent] else {
            return mask;
        };
        for a in [UP, DOWN, LEFT, RIGHT] {
            if let Some(t) = neighbour(cell, a, self.config.grid) {
                mask[a] = !self.occupied(t);
            }
        }
        mask[CATCH] = self.state.prey.iter().flatten().any(|&p| adjacent(p, cell));
        mask
    }

    /// 5x5 window around the agent, channel-major: predators, then prey.
    /// Cells outside the grid read -1 in both channels.
    pub fn agent_observation(&self, agent: usize) -> Vec<f64> {
        let mut obs = vec![0.0; OBS_DIM];
        let Some((r, c)) = self.state.predators[agent] else {
            return obs;
        };
        let g = self.config.grid as isize;
        let half = (VIEW / 2) as isize;
        for dr in -half..=half {
            for dc in -half..=half {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                let idx = ((dr + half) as usize) * VIEW + (dc + half) as usize;
                if rr < 0 || cc < 0 || rr >= g || cc >= g {
                    obs[idx] = -1.0;
                    obs[VIEW * VIEW + idx] = -1.0;
                    continue;
                }
                let cell = (rr as usize, cc as usize);
                if self.state.predators.contains(&Some(cell)) {
                    obs[idx] = 1.0;
                }
                if self.state.prey.contains(&Some(cell)) {
                    obs[VIEW * VIEW + idx] = 1.0;
                }
            }
        }
        obs
    }

    pub fn pp_step(&mut self, actions: &[usize]) -> Result<StepOutput> {
        let n = self.config.predators;
        if actions.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} actions, got {}",
                actions.len()
            )));
        }
        for (agent, &a) in actions.iter().enumerate() {
            if a >= N_ACTIONS || !self.agent_availability(agent)[a] {
                return Err(Error::UnavailableAction { agent, action: a });
            }
        }

        // Catches on the pre-step layout.
        let catchers: Vec<usize> = (0..n)
            .filter(|&i| actions[i] == CATCH && self.state.predators[i].is_some())
            .collect();
        let mut reward = 0.0;
        let mut captured_prey = Vec::new();
        let mut participated = vec![false; n];
        for (j, prey) in self.state.prey.iter().enumerate() {
            let Some(p) = *prey else { continue };
            let around: Vec<usize> = catchers
                .iter()
                .copied()
                .filter(|&i| adjacent(self.state.predators[i].unwrap(), p))
                .collect();
            if around.len() >= 2 {
                captured_prey.push(j);
                for i in around {
                    participated[i] = true;
                }
                reward += self.config.capture_reward;
            }
        }
        for &i in &catchers {
            if !participated[i] {
                reward += self.config.penalty;
            }
        }
        for j in captured_prey {
            self.state.prey[j] = None;
        }
        for (i, done) in participated.iter().enumerate() {
            if *done {
                self.state.predators[i] = None;
            }
        }

        // Prey: stay or step to a free neighbour, uniformly.
        let g = self.config.grid;
        for j in 0..self.state.prey.len() {
            let Some(p) = self.state.prey[j] else {
                continue;
            };
            let mut options = vec![p];
            for a in [UP, DOWN, LEFT, RIGHT] {
                if let Some(t) = neighbour(p, a, g) {
                    if !self.occupied(t) {
                        options.push(t);
                    }
                }
            }
            let pick = options[self.rng.gen_range(0..options.len())];
            self.state.prey[j] = Some(pick);
        }

        // Predators: random priority, blocked moves stay.
        let mut order: Vec<usize> = (0..n)
            .filter(|&i| self.state.predators[i].is_some() && (UP..=RIGHT).contains(&actions[i]))
            .collect();
        order.shuffle(&mut self.rng);
        for i in order {
            let cell = self.state.predators[i].unwrap();
            if let Some(t) = neighbour(cell, actions[i], g) {
                if !self.occupied(t) {
                    self.state.predators[i] = Some(t);
                }
            }
        }

        self.state.step += 1;
        let done = self.live_predators() == 0 || self.state.step >= self.config.episode_limit;
        Ok(StepOutput { reward, done })
    }

    /// Flattened global state: predator grid then prey grid.
    pub fn global_state(&self) -> Vec<f64> {
        let g = self.config.grid;
        let mut s = vec![0.0; 2 * g * g];
        for (r, c) in self.state.predators.iter().flatten() {
            s[r * g + c] = 1.0;
        }
        for (r, c) in self.state.prey.iter().flatten() {
            s[g * g + r * g + c] = 1.0;
        }
        s
    }
}

impl MultiAgentEnv for PredatorPrey {
    fn info(&self) -> EnvInfo {
        EnvInfo {
            n_agents: self.config.predators,
            n_actions: N_ACTIONS,
            obs_dim: OBS_DIM,
            state_dim: 2 * self.config.grid * self.config.grid,
            episode_limit: self.config.episode_limit,
        }
    }

    fn reset(&mut self, seed: u64) {
        self.pp_reset(seed);
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepOutput> {
        self.pp_step(actions)
    }

    fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.config.predators)
            .map(|i| self.agent_observation(i))
            .collect()
    }

    fn state(&self) -> Vec<f64> {
        self.global_state()
    }

    fn availability(&self) -> Availability {
        let mask = (0..self.config.predators)
            .flat_map(|i| self.agent_availability(i))
            .collect();
        Availability::new(N_ACTIONS, mask).expect("rows of N_ACTIONS")
    }
}

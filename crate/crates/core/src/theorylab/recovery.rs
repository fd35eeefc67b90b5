use super::table::{decode, OptimalActions, TabularQ};
use crate::envs::checked_power;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const HILL_CLIMB_RESTARTS: usize = 16;

/// Decentralized greedy policy that a monotonic factorization induces:
/// each agent's action depends on its own local state only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonotonicPolicyMap {
    pub n: usize,
    pub states: usize,
    pub actions: usize,
    /// `table[i * states + s]` is agent `i`'s action in local state `s`.
    pub table: Vec<usize>,
}

impl MonotonicPolicyMap {
    pub fn new(n: usize, states: usize, actions: usize, table: Vec<usize>) -> Result<Self> {
        if table.len() != n * states {
            return Err(Error::InvalidArgument(format!(
                "map needs {} entries, got {}",
                n * states,
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|&&a| a >= actions) {
            return Err(Error::InvalidArgument(format!(
                "action {bad} out of range {actions}"
            )));
        }
        Ok(Self {
            n,
            states,
            actions,
            table,
        })
    }

    pub fn constant(n: usize, states: usize, actions: usize, per_agent: &[usize]) -> Result<Self> {
        let table = per_agent
            .iter()
            .flat_map(|&a| std::iter::repeat_n(a, states))
            .collect();
        Self::new(n, states, actions, table)
    }

    pub fn action(&self, agent: usize, local_state: usize) -> usize {
        self.table[agent * self.states + local_state]
    }

    /// Joint action prescribed in an encoded joint state.
    pub fn joint_action(&self, joint_state: usize) -> Vec<usize> {
        decode(joint_state, self.states, self.n)
            .into_iter()
            .enumerate()
            .map(|(i, s)| self.action(i, s))
            .collect()
    }
}

fn check_dims(opt: &OptimalActions, m: &MonotonicPolicyMap) -> Result<()> {
    if (opt.n, opt.states, opt.actions) != (m.n, m.states, m.actions) {
        return Err(Error::InvalidArgument(format!(
            "map dims (n={}, S={}, A={}) do not match table (n={}, S={}, A={})",
            m.n, m.states, m.actions, opt.n, opt.states, opt.actions
        )));
    }
    Ok(())
}

/// Fraction of joint states whose optimal joint action the map reproduces.
pub fn recovery_fraction(q: &TabularQ, m: &MonotonicPolicyMap) -> Result<f64> {
    let opt = q.optimal_actions();
    check_dims(&opt, m)?;
    Ok(Counter::new(&opt).fraction(&m.table))
}

pub fn recovery_fraction_of(opt: &OptimalActions, m: &MonotonicPolicyMap) -> Result<f64> {
    check_dims(opt, m)?;
    Ok(Counter::new(opt).fraction(&m.table))
}

#[derive(Clone, Debug, Serialize)]
pub struct Recovery {
    pub map: MonotonicPolicyMap,
    pub fraction: f64,
    /// True when every map was enumerated.
    pub exact: bool,
}

/// Precomputed digits for fast match counting.
struct Counter {
    n: usize,
    states: usize,
    actions: usize,
    joint: usize,
    state_digits: Vec<usize>,
    opt_digits: Vec<usize>,
}

impl Counter {
    fn new(opt: &OptimalActions) -> Self {
        Self {
            n: opt.n,
            states: opt.states,
            actions: opt.actions,
            joint: opt.joint_states(),
            state_digits: opt.state_digits(),
            opt_digits: opt.optimal_digits(),
        }
    }

    fn matches(&self, table: &[usize]) -> usize {
        (0..self.joint)
            .filter(|&s| {
                let sd = &self.state_digits[s * self.n..(s + 1) * self.n];
                let od = &self.opt_digits[s * self.n..(s + 1) * self.n];
                (0..self.n).all(|i| table[i * self.states + sd[i]] == od[i])
            })
            .count()
    }

    fn fraction(&self, table: &[usize]) -> f64 {
        self.matches(table) as f64 / self.joint as f64
    }

    /// Per-action match counts over the states with `s_i = local`, given
    /// that all other agents follow `table`.
    fn coordinate_votes(&self, table: &[usize], agent: usize, local: usize) -> Vec<usize> {
        let mut votes = vec![0; self.actions];
        for s in 0..self.joint {
            let sd = &self.state_digits[s * self.n..(s + 1) * self.n];
            if sd[agent] != local {
                continue;
            }
            let od = &self.opt_digits[s * self.n..(s + 1) * self.n];
            if (0..self.n).all(|j| j == agent || table[j * self.states + sd[j]] == od[j]) {
                votes[od[agent]] += 1;
            }
        }
        votes
    }

    /// Visits joint states in `order`, fixing the entries each one needs
    /// unless they clash with entries fixed earlier; the rest are random.
    fn greedy_consistent<R: Rng>(&self, order: &[usize], rng: &mut R) -> Vec<usize> {
        let mut table: Vec<Option<usize>> = vec![None; self.n * self.states];
        for &s in order {
            let sd = &self.state_digits[s * self.n..(s + 1) * self.n];
            let od = &self.opt_digits[s * self.n..(s + 1) * self.n];
            let fits =
                (0..self.n).all(|i| table[i * self.states + sd[i]].is_none_or(|a| a == od[i]));
            if fits {
                for i in 0..self.n {
                    table[i * self.states + sd[i]] = Some(od[i]);
                }
            }
        }
        table
            .into_iter()
            .map(|a| a.unwrap_or_else(|| rng.gen_range(0..self.actions)))
            .collect()
    }

    fn hill_climb(&self, mut table: Vec<usize>) -> (Vec<usize>, usize) {
        loop {
            let mut improved = false;
            for agent in 0..self.n {
                for local in 0..self.states {
                    let votes = self.coordinate_votes(&table, agent, local);
                    let slot = agent * self.states + local;
                    let mut best = table[slot];
                    for (a, &v) in votes.iter().enumerate() {
                        if v > votes[best] {
                            best = a;
                        }
                    }
                    if best != table[slot] {
                        table[slot] = best;
                        improved = true;
                    }
                }
            }
            if !improved {
                let m = self.matches(&table);
                return (table, m);
            }
        }
    }
}

/// Per agent and local state, the most frequent optimal action component
/// (lowest index on ties).
pub fn marginal_vote_map(opt: &OptimalActions) -> MonotonicPolicyMap {
    let c = Counter::new(opt);
    let mut counts = vec![0usize; opt.n * opt.states * opt.actions];
    for s in 0..c.joint {
        for i in 0..opt.n {
            let local = c.state_digits[s * opt.n + i];
            let a = c.opt_digits[s * opt.n + i];
            counts[(i * opt.states + local) * opt.actions + a] += 1;
        }
    }
    let table = counts
        .chunks(opt.actions)
        .map(|row| {
            let mut best = 0;
            for (a, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    MonotonicPolicyMap {
        n: opt.n,
        states: opt.states,
        actions: opt.actions,
        table,
    }
}

/// Exhaustive search over all `A^(n S)` maps when that count is within
/// `budget`; otherwise coordinate hill-climbing from the marginal-vote map
/// and from greedy consistent maps over shuffled joint states. Outside the
/// exhaustive regime the result is a lower bound on the best fraction.
pub fn best_recovery_of(opt: &OptimalActions, budget: usize, seed: u64) -> Recovery {
    let c = Counter::new(opt);
    let slots = opt.n * opt.states;
    let count = checked_power(opt.actions, slots);
    let make = |table: Vec<usize>, m: usize, exact: bool| Recovery {
        fraction: m as f64 / c.joint as f64,
        map: MonotonicPolicyMap {
            n: opt.n,
            states: opt.states,
            actions: opt.actions,
            table,
        },
        exact,
    };

    if count.is_some_and(|k| k <= budget) {
        let mut table = vec![0usize; slots];
        let mut best = (table.clone(), c.matches(&table));
        loop {
            let mut pos = slots;
            loop {
                if pos == 0 {
                    return make(best.0, best.1, true);
                }
                pos -= 1;
                table[pos] += 1;
                if table[pos] < opt.actions {
                    break;
                }
                table[pos] = 0;
            }
            let m = c.matches(&table);
            if m > best.1 {
                best = (table.clone(), m);
                if m == c.joint {
                    return make(best.0, best.1, true);
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = c.hill_climb(marginal_vote_map(opt).table);
    let mut order: Vec<usize> = (0..c.joint).collect();
    for _ in 1..HILL_CLIMB_RESTARTS {
        order.shuffle(&mut rng);
        let cand = c.hill_climb(c.greedy_consistent(&order, &mut rng));
        if cand.1 > best.1 {
            best = cand;
        }
    }
    make(best.0, best.1, false)
}

pub fn best_monotonic_recovery(q: &TabularQ, budget: usize) -> Recovery {
    best_recovery_of(&q.optimal_actions(), budget, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_encode() {
        use super::super::table::encode;
        for i in 0..27 {
            assert_eq!(encode(&decode(i, 3, 3), 3), i);
        }
        assert_eq!(decode(5, 2, 3), vec![1, 0, 1]);
    }

    #[test]
    fn single_agent_recovers_everything() {
        let q = crate::envs::random_tabular_q(1, 5, 4, 1).unwrap();
        let opt = q.optimal_actions();
        let m = MonotonicPolicyMap::new(1, 5, 4, opt.optimal.clone()).unwrap();
        assert_eq!(recovery_fraction(&q, &m).unwrap(), 1.0);
        assert_eq!(best_monotonic_recovery(&q, 1 << 20).fraction, 1.0);
    }

    #[test]
    fn single_state_constant_map() {
        let q = crate::envs::random_tabular_q(2, 1, 3, 2).unwrap();
        let star = decode(q.argmax(0), 3, 2);
        let m = MonotonicPolicyMap::constant(2, 1, 3, &star).unwrap();
        assert_eq!(recovery_fraction(&q, &m).unwrap(), 1.0);
    }

    #[test]
    fn dims_must_match() {
        let q = crate::envs::random_tabular_q(2, 2, 2, 3).unwrap();
        let m = MonotonicPolicyMap::constant(2, 2, 3, &[0, 0]).unwrap();
        assert!(recovery_fraction(&q, &m).is_err());
    }
}

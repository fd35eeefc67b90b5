//! Joint-action selection over a (concave) mixer: per-agent greedy
//! initialization followed by coordinate-ascent sweeps.

use crate::error::{Error, Result};
use crate::nets::MixerWeights;

/// Per-agent availability of each action, `n x n_actions` row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Availability {
    n_actions: usize,
    mask: Vec<bool>,
}

impl Availability {
    pub fn new(n_actions: usize, mask: Vec<bool>) -> Result<Self> {
        if n_actions == 0 || !mask.len().is_multiple_of(n_actions) {
            return Err(Error::InvalidArgument(format!(
                "mask of length {} does not split into rows of {n_actions}",
                mask.len()
            )));
        }
        Ok(Self { n_actions, mask })
    }

    pub fn all(n_agents: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            mask: vec![true; n_agents * n_actions],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.mask.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, agent: usize) -> &[bool] {
        &self.mask[agent * self.n_actions..(agent + 1) * self.n_actions]
    }

    pub fn is_available(&self, agent: usize, action: usize) -> bool {
        action < self.n_actions && self.row(agent)[action]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }
}

/// One action index per agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, avail: &Availability) -> Result<()> {
        if self.0.len() != avail.n_agents() {
            return Err(Error::InvalidArgument(format!(
                "joint action has {} entries for {} agents",
                self.0.len(),
                avail.n_agents()
            )));
        }
        for (agent, &action) in self.0.iter().enumerate() {
            if !avail.is_available(agent, action) {
                return Err(Error::UnavailableAction { agent, action });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionTrace {
    pub initial_value: f64,
    /// Value after each completed sweep; non-decreasing.
    pub sweep_values: Vec<f64>,
    pub final_action: JointAction,
    pub sweeps_used: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub action: JointAction,
    pub value: f64,
    pub trace: SelectionTrace,
}

/// Available-argmax of each agent's utility row; ties go to the lowest index.
pub fn greedy_init(utilities: &[f64], avail: &Availability) -> Result<JointAction> {
    let a = avail.n_actions();
    if utilities.len() != avail.as_slice().len() {
        return Err(Error::shape(
            "greedy_init",
            format!(
                "{} utilities for mask of {}",
                utilities.len(),
                avail.as_slice().len()
            ),
        ));
    }
    let mut actions = Vec::with_capacity(avail.n_agents());
    for (agent, (row, mask)) in utilities
        .chunks(a)
        .zip(avail.as_slice().chunks(a))
        .enumerate()
    {
        let mut best: Option<(usize, f64)> = None;
        for (j, (&u, &ok)) in row.iter().zip(mask).enumerate() {
            if ok && best.is_none_or(|(_, b)| u > b) {
                best = Some((j, u));
            }
        }
        match best {
            Some((j, _)) => actions.push(j),
            None => return Err(Error::NoAvailableAction(agent)),
        }
    }
    Ok(JointAction(actions))
}

/// Coordinate ascent over joint actions.
///
/// Agents are visited in index order; each agent's action is replaced by the
/// available action with the largest value holding the others fixed, and a
/// replacement is accepted only on strict improvement. Stops after a sweep
/// with no improvement or after `max_sweeps` sweeps.
pub fn iterative_action_selection<F>(
    mut qtot: F,
    init: &JointAction,
    avail: &Availability,
    max_sweeps: usize,
) -> Result<Selection>
where
    F: FnMut(&[usize]) -> f64,
{
    if max_sweeps == 0 {
        return Err(Error::InvalidArgument(
            "max_sweeps must be at least 1".into(),
        ));
    }
    init.validate(avail)?;
    let mut eval = |u: &[usize], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        let v = qtot(u);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!(
                "Q_tot at joint action {u:?} is {v}"
            )))
        }
    };
    let mut evaluations = 0;
    let mut current = init.0.clone();
    let mut best = eval(&current, &mut evaluations)?;
    let initial_value = best;
    let mut sweep_values = Vec::new();
    let mut candidate = current.clone();

    for _ in 0..max_sweeps {
        let mut improved = false;
        for agent in 0..current.len() {
            candidate.copy_from_slice(&current);
            for action in 0..avail.n_actions() {
                if !avail.is_available(agent, action) {
                    continue;
                }
                candidate[agent] = action;
                let v = eval(&candidate, &mut evaluations)?;
                if v > best {
                    best = v;
                    current[agent] = action;
                    improved = true;
                }
            }
        }
        sweep_values.push(best);
        if !improved {
            break;
        }
    }
    let action = JointAction(current);
    Ok(Selection {
        value: best,
        trace: SelectionTrace {
            initial_value,
            sweeps_used: sweep_values.len(),
            sweep_values,
            final_action: action.clone(),
            evaluations,
        },
        action,
    })
}

/// Evaluator that mixes the chosen entries of a per-agent utility table.
pub fn mixer_evaluator<'a>(
    weights: &'a MixerWeights,
    utilities: &'a [f64],
    n_actions: usize,
) -> impl FnMut(&[usize]) -> f64 + 'a {
    let mut x = Vec::new();
    move |u: &[usize]| {
        x.clear();
        x.extend(
            u.iter()
                .enumerate()
                .map(|(i, &a)| utilities[i * n_actions + a]),
        );
        weights.eval_unchecked(&x)
    }
}

/// Greedy init plus coordinate ascent on a mixer for one state.
pub fn select_on_mixer(
    weights: &MixerWeights,
    utilities: &[f64],
    avail: &Availability,
    max_sweeps: usize,
) -> Result<Selection> {
    let init = greedy_init(utilities, avail)?;
    iterative_action_selection(
        mixer_evaluator(weights, utilities, avail.n_actions()),
        &init,
        avail,
        max_sweeps,
    )
}

/// Exhaustive argmax over all available joint actions (lowest index on ties).
pub fn exhaustive_argmax<F>(mut qtot: F, avail: &Availability) -> Result<(JointAction, f64)>
where
    F: FnMut(&[usize]) -> f64,
{
    let n = avail.n_agents();
    let a = avail.n_actions();
    let options: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..a).filter(|&j| avail.is_available(i, j)).collect())
        .collect();
    if let Some(agent) = options.iter().position(Vec::is_empty) {
        return Err(Error::NoAvailableAction(agent));
    }
    let mut idx = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let u: Vec<usize> = idx.iter().zip(&options).map(|(&k, o)| o[k]).collect();
        let v = qtot(&u);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((u, v));
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                let (u, v) = best.expect("at least one joint action");
                return Ok((JointAction(u), v));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_examples() {
        let all = Availability::all(2, 2);
        assert_eq!(greedy_init(&[1., 3., 2., 0.], &all).unwrap().0, vec![1, 0]);
        assert_eq!(
            greedy_init(&[5., 5.], &Availability::all(1, 2)).unwrap().0,
            vec![0]
        );
        let masked = Availability::new(2, vec![false, true]).unwrap();
        assert_eq!(greedy_init(&[9., 1.], &masked).unwrap().0, vec![1]);
    }

    #[test]
    fn greedy_without_options_fails() {
        let none = Availability::new(2, vec![true, true, false, false]).unwrap();
        assert!(matches!(
            greedy_init(&[0., 0., 0., 0.], &none),
            Err(Error::NoAvailableAction(1))
        ));
    }

    #[test]
    fn separable_quadratic_reaches_optimum() {
        // 3 x 5 grid: agent 0 ranges over 0..3, agent 1 over 0..5
        let mask: Vec<bool> = (0..10).map(|i| !(3..5).contains(&i)).collect();
        let avail = Availability::new(5, mask).unwrap();
        let f = |u: &[usize]| {
            let (a, b) = (u[0] as f64, u[1] as f64);
            -(a - 1.0).powi(2) - (b - 2.0).powi(2)
        };
        let sel = iterative_action_selection(f, &JointAction(vec![0, 0]), &avail, 2).unwrap();
        let (best, v) = exhaustive_argmax(f, &avail).unwrap();
        assert_eq!(sel.action.0, vec![1, 2]);
        assert_eq!(sel.action, best);
        assert_eq!(sel.value, 0.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn coordinate_stable_local_optimum() {
        let table = [[10.0, 2.0], [3.0, 5.0]];
        let f = |u: &[usize]| table[u[0]][u[1]];
        let avail = Availability::all(2, 2);
        let sel = iterative_action_selection(f, &JointAction(vec![1, 1]), &avail, 10).unwrap();
        assert_eq!(sel.action.0, vec![1, 1]);
        assert_eq!(sel.value, 5.0);
        assert_eq!(exhaustive_argmax(f, &avail).unwrap().1, 10.0);
    }

    #[test]
    fn evaluations_per_sweep() {
        let avail = Availability::all(3, 4);
        let sel =
            iterative_action_selection(|_| 1.0, &JointAction(vec![0, 0, 0]), &avail, 5).unwrap();
        assert_eq!(sel.trace.sweeps_used, 1);
        assert_eq!(sel.trace.evaluations, 1 + 3 * 4);
    }

    #[test]
    fn ties_keep_incumbent() {
        let avail = Availability::all(2, 3);
        let sel = iterative_action_selection(|_| 0.0, &JointAction(vec![2, 1]), &avail, 3).unwrap();
        assert_eq!(sel.action.0, vec![2, 1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let avail = Availability::new(2, vec![true, false]).unwrap();
        assert!(iterative_action_selection(|_| 0.0, &JointAction(vec![1]), &avail, 1).is_err());
        assert!(iterative_action_selection(|_| 0.0, &JointAction(vec![0]), &avail, 0).is_err());
        let err =
            iterative_action_selection(|_| f64::NAN, &JointAction(vec![0]), &avail, 1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}

use crate::diffcore::{GradCheck, GradCheckReport, Tape, Tensor, Var};
use crate::envs::EnvInfo;
use crate::error::Result;
use crate::learner::{Ablation, BoundVars, Learner, NetConfig, TrainConfig, Transition, GROUPS};
use crate::nets::ParameterSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference results for one network or for the composite loss.
#[derive(Clone, Debug)]
pub struct NetworkCheck {
    pub network: String,
    pub report: GradCheckReport,
}

#[derive(Clone, Debug)]
pub struct GradcheckSuite {
    pub checks: Vec<NetworkCheck>,
    pub tolerance: f64,
}

impl GradcheckSuite {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.report.passed)
    }

    /// `(network, tensor, error)` for every tensor over tolerance.
    pub fn failures(&self) -> Vec<(String, String, f64)> {
        self.checks
            .iter()
            .flat_map(|c| {
                c.report
                    .failures()
                    .map(|t| (c.network.clone(), t.name.clone(), t.max_rel_error))
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

type Hook<'a> = &'a dyn Fn(&str, &mut [Tensor]);

pub struct GradcheckOptions<'a> {
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    /// Transitions in the composite-loss batch.
    pub batch: usize,
    /// Tampers with analytic gradients of the named network before comparison.
    pub hook: Option<Hook<'a>>,
}

impl Default for GradcheckOptions<'_> {
    fn default() -> Self {
        Self {
            seed: 0,
            step: 1e-5,
            tolerance: 1e-4,
            batch: 4,
            hook: None,
        }
    }
}

/// Small learner whose every parameter is checked in full.
pub fn probe_learner(seed: u64) -> Result<Learner> {
    let info = EnvInfo {
        n_agents: 3,
        n_actions: 4,
        obs_dim: 5,
        state_dim: 6,
        episode_limit: 10,
    };
    let config = TrainConfig {
        obs_window: 2,
        batch: 4,
        buffer_capacity: 16,
        ..TrainConfig::default()
    };
    let nets = NetConfig {
        agent_hidden: vec![8],
        policy_hidden: vec![8],
        mixer_widths: vec![5, 4, 3],
        qstar_hidden: vec![8],
    };
    Learner::new(info, config, nets, Ablation::default(), seed)
}

fn random_mask<R: Rng>(rows: usize, a: usize, rng: &mut R) -> Vec<bool> {
    let mut mask: Vec<bool> = (0..rows * a).map(|_| rng.gen_bool(0.7)).collect();
    for r in 0..rows {
        let keep = rng.gen_range(0..a);
        mask[r * a + keep] = true;
    }
    mask
}

fn available_action<R: Rng>(mask: &[bool], rng: &mut R) -> usize {
    let options: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
    options[rng.gen_range(0..options.len())]
}

/// Random transitions shaped for `learner`; the first is terminal.
pub fn random_transitions(learner: &Learner, count: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let info = learner.info;
    let (n, a) = (info.n_agents, info.n_actions);
    let in_dim = learner.input.input_dim();
    let vec = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    (0..count)
        .map(|k| {
            let avail = random_mask(n, a, &mut rng);
            let actions = avail
                .chunks(a)
                .map(|m| available_action(m, &mut rng))
                .collect();
            Transition {
                state: vec(info.state_dim, &mut rng),
                next_state: vec(info.state_dim, &mut rng),
                inputs: vec(n * in_dim, &mut rng),
                next_inputs: vec(n * in_dim, &mut rng),
                next_avail: random_mask(n, a, &mut rng),
                avail,
                actions,
                reward: rng.gen_range(-2.0..2.0),
                terminal: k == 0,
            }
        })
        .collect()
}

fn flatten(groups: &[(&str, &ParameterSet)]) -> (Vec<String>, Vec<Tensor>, Vec<usize>) {
    let mut names = Vec::new();
    let mut tensors = Vec::new();
    let mut sizes = Vec::new();
    for (group, p) in groups {
        for (name, t) in p.iter() {
            names.push(format!("{group}/{name}"));
            tensors.push(t.clone());
        }
        sizes.push(p.len());
    }
    (names, tensors, sizes)
}

fn split<'v>(vars: &'v [Var], sizes: &[usize]) -> Vec<&'v [Var]> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(&vars[start..start + s]);
        start += s;
    }
    out
}

/// `sum(c * out)` against a fixed random `c`, zero where `skip` is set.
fn projected(tape: &mut Tape, out: Var, seed: u64, skip: Option<&[bool]>) -> Result<Var> {
    let value = tape.value(out).clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..value.len())
        .map(|i| {
            let c = rng.gen_range(-1.0..1.0);
            if skip.is_some_and(|s| s[i]) {
                0.0
            } else {
                c
            }
        })
        .collect();
    let c = tape.constant(Tensor::new(value.shape().to_vec(), data)?);
    let prod = tape.mul(out, c)?;
    Ok(tape.sum(prod))
}

/// Checks every learner network against central differences, then the
/// composite `L_pi + L_Q* + L_ConcaveQ` on a small random batch with the
/// selected joint actions and targets held fixed.
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckSuite> {
    let learner = probe_learner(opts.seed)?;
    let info = learner.info;
    let (n, a, sd) = (info.n_agents, info.n_actions, info.state_dim);
    let in_dim = learner.input.input_dim();
    let rows = opts.batch.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5EED);
    let mut random = |shape: &[usize]| Tensor::uniform(shape, 1.0, &mut rng);
    let states = random(&[rows, sd]);
    let inputs = random(&[rows * n, in_dim]);
    let utilities = random(&[rows, n]);
    let mut mask_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xA5A5);
    let mask = random_mask(rows * n, a, &mut mask_rng);
    let masked: Vec<bool> = mask.iter().map(|m| !m).collect();

    let mut checks = Vec::new();
    let mut check = |network: &str,
                     p: &ParameterSet,
                     f: &dyn Fn(&mut Tape, &[Var]) -> Result<Var>|
     -> Result<()> {
        let hook = |g: &mut [Tensor]| {
            if let Some(h) = opts.hook {
                h(network, g)
            }
        };
        let (names, tensors, _) = flatten(&[(network, p)]);
        let report = GradCheck::new(opts.step, opts.tolerance)?
            .with_hook(&hook)
            .run(f, &names, &tensors)?;
        checks.push(NetworkCheck {
            network: network.to_string(),
            report,
        });
        Ok(())
    };

    check(GROUPS[0], &learner.utility.params, &|tape, vars| {
        let x = tape.constant(inputs.clone());
        let out = learner.utility.forward(tape, vars, x)?;
        projected(tape, out, 1, None)
    })?;
    check(GROUPS[1], learner.mixer.params(), &|tape, vars| {
        let s = tape.constant(states.clone());
        let u = tape.constant(utilities.clone());
        let out = learner.mixer.forward_batch(tape, vars, s, u)?;
        projected(tape, out, 2, None)
    })?;
    check(GROUPS[2], &learner.qstar.params, &|tape, vars| {
        let s = tape.constant(states.clone());
        let u = tape.constant(utilities.clone());
        let out = learner.qstar.forward_batch(tape, vars, s, u)?;
        projected(tape, out, 3, None)
    })?;
    check(GROUPS[3], learner.critic.params(), &|tape, vars| {
        let s = tape.constant(states.clone());
        let u = tape.constant(utilities.clone());
        let out = learner.critic.forward_batch(tape, vars, s, u)?;
        projected(tape, out, 4, None)
    })?;
    check(GROUPS[4], &learner.policy.params, &|tape, vars| {
        let x = tape.constant(inputs.clone());
        let (probs, logp) = learner.policy.forward(tape, vars, x, &mask)?;
        let lp = projected(tape, probs, 5, None)?;
        // masked log-probabilities sit at the sentinel and are left out
        let ll = projected(tape, logp, 6, Some(&masked))?;
        tape.add(lp, ll)
    })?;

    let batch = random_transitions(&learner, rows, opts.seed ^ 0xBA7C);
    let prepared = learner.prepare(&batch)?;
    let sets = learner.param_sets();
    let groups: Vec<(&str, &ParameterSet)> = GROUPS.iter().copied().zip(sets).collect();
    let (names, tensors, sizes) = flatten(&groups);
    let hook = |g: &mut [Tensor]| {
        if let Some(h) = opts.hook {
            h("composite", g)
        }
    };
    let composite = |tape: &mut Tape, vars: &[Var]| -> Result<Var> {
        let parts = split(vars, &sizes);
        let bound = BoundVars {
            utility: parts[0],
            mixer: parts[1],
            qstar: parts[2],
            critic_in_policy: parts[3],
            critic_fit: parts[3],
            policy: parts[4],
        };
        Ok(learner.build_losses(tape, &bound, &prepared)?.total)
    };
    let report = GradCheck::new(opts.step, opts.tolerance)?
        .with_hook(&hook)
        .run(composite, &names, &tensors)?;
    checks.push(NetworkCheck {
        network: "composite".into(),
        report,
    });

    Ok(GradcheckSuite {
        checks,
        tolerance: opts.tolerance,
    })
}

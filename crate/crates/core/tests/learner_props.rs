//! Targets, losses, temperature and update mechanics against scalar oracles.

use concaveq::actsel::Availability;
use concaveq::diffcore::{Tape, Var};
use concaveq::envs::EnvConfig;
use concaveq::harness::{build_learner, probe_learner, random_transitions, RunConfig};
use concaveq::learner::{
    alpha_update, entropy, loss_policy, target_entropy, Ablation, BoundVars, Learner,
    MetricsRecord, PolicySample, Trainer, Transition, MIXER, QSTAR, UTILITY,
};
use concaveq::nets::{Checkpoint, MixerKind, MixerWeights};

fn run_config(ablation: Ablation, seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed,
        env: EnvConfig::default(),
        ablation,
        ..RunConfig::default()
    };
    cfg.train.batch = 8;
    cfg.train.buffer_capacity = 64;
    cfg.train.target_update_episodes = 5;
    cfg.train.total_steps = 200;
    cfg.train.eval_episodes = 2;
    cfg.train.eval_interval_steps = 50;
    cfg
}

fn trainer(ablation: Ablation, seed: u64) -> Trainer {
    let cfg = run_config(ablation, seed);
    let (learner, env) = build_learner(&cfg).unwrap();
    Trainer::new(learner, env, cfg.seed)
}

fn episodes(t: &mut Trainer, count: usize) -> Vec<MetricsRecord> {
    let mut out = Vec::new();
    for _ in 0..count {
        t.train_episode(&mut |r| {
            out.push(r.clone());
            Ok(())
        })
        .unwrap();
    }
    out
}

fn checksums(l: &Learner) -> Vec<u64> {
    l.param_sets().iter().map(|p| p.checksum()).collect()
}

/// Greedy init then index-order coordinate ascent with strict improvement.
fn ascent(
    w: &MixerWeights,
    util: &[f64],
    mask: &[bool],
    a: usize,
    sweeps: usize,
) -> (Vec<usize>, f64) {
    let n = util.len() / a;
    let value = |u: &[usize]| -> f64 {
        let x: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, &j)| util[i * a + j])
            .collect();
        w.eval(&x).unwrap()
    };
    let mut u: Vec<usize> = (0..n)
        .map(|i| {
            let ok: Vec<usize> = (0..a).filter(|&j| mask[i * a + j]).collect();
            ok.iter().copied().fold(ok[0], |b, j| {
                if util[i * a + j] > util[i * a + b] {
                    j
                } else {
                    b
                }
            })
        })
        .collect();
    let mut best = value(&u);
    for _ in 0..sweeps {
        let mut improved = false;
        for i in 0..n {
            for j in (0..a).filter(|&j| mask[i * a + j]) {
                let mut c = u.clone();
                c[i] = j;
                let v = value(&c);
                if v > best {
                    best = v;
                    u = c;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (u, best)
}

fn pick(util: &[f64], u: &[usize], a: usize) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(i, &j)| util[i * a + j])
        .collect()
}

/// Learner whose online networks have drifted away from the targets.
fn drifted_learner() -> Learner {
    let mut l = probe_learner(11).unwrap();
    for t in l.utility.params.tensors_mut() {
        for v in t.data_mut() {
            *v *= 1.3;
        }
    }
    for t in l.qstar.params.tensors_mut() {
        for v in t.data_mut() {
            *v += 0.05;
        }
    }
    l
}

#[test]
fn targets_match_a_scalar_oracle() {
    let l = drifted_learner();
    let batch = random_transitions(&l, 32, 5);
    let p = l.prepare(&batch).unwrap();
    let a = l.info.n_actions;
    let sweeps = l.config.sweeps(l.info.n_agents);
    for (k, tr) in batch.iter().enumerate() {
        let y = if tr.terminal {
            tr.reward
        } else {
            let util = l
                .utility
                .utilities_with(l.targets.target(UTILITY), &tr.next_inputs);
            let w = l
                .mixer
                .weights_with(l.targets.target(MIXER), &tr.next_state);
            let (u, _) = ascent(&w, &util, &tr.next_avail, a, sweeps);
            let q = l
                .qstar
                .eval_with(l.targets.target(QSTAR), &pick(&util, &u, a), &tr.next_state)
                .unwrap();
            tr.reward + l.config.gamma * q
        };
        assert!(
            (p.targets[k] - y).abs() <= 1e-12 * y.abs().max(1.0),
            "row {k}: {} vs {y}",
            p.targets[k]
        );
    }
    assert!(batch[0].terminal);
    assert_eq!(p.targets[0], batch[0].reward);

    // online networks give different values, so the targets really are used
    let mut synced = drifted_learner();
    synced.sync_targets().unwrap();
    let q = synced.prepare(&batch).unwrap();
    assert!(p
        .targets
        .iter()
        .zip(&q.targets)
        .skip(1)
        .any(|(x, y)| (x - y).abs() > 1e-6));
}

fn bound_all(l: &Learner, tape: &mut Tape) -> Vec<Vec<Var>> {
    l.param_sets().iter().map(|p| p.bind(tape, true)).collect()
}

fn vars<'a>(v: &'a [Vec<Var>]) -> BoundVars<'a> {
    BoundVars {
        utility: &v[0],
        mixer: &v[1],
        qstar: &v[2],
        critic_in_policy: &v[3],
        critic_fit: &v[3],
        policy: &v[4],
    }
}

#[test]
fn losses_match_scalar_oracles() {
    let l = drifted_learner();
    let batch = random_transitions(&l, 128, 9);
    let p = l.prepare(&batch).unwrap();
    let mut tape = Tape::new();
    let v = bound_all(&l, &mut tape);
    let losses = l.build_losses(&mut tape, &vars(&v), &p).unwrap();
    let (n, a) = (l.info.n_agents, l.info.n_actions);
    let b = batch.len() as f64;

    let (mut lc, mut lq, mut sc) = (0.0, 0.0, 0.0);
    let mut samples = Vec::new();
    let probs = tape.value(losses.probs.unwrap()).data().to_vec();
    for (k, tr) in batch.iter().enumerate() {
        let y = p.targets[k];
        let util = l.utility.utilities(&tr.inputs);
        let q = l
            .mixer
            .eval(&pick(&util, &tr.actions, a), &tr.state)
            .unwrap();
        let w = if q < y { 1.0 } else { 0.5 };
        lc += w * (q - y).powi(2);
        let qs = l
            .qstar
            .eval(&pick(&util, &p.uhat[k * n..(k + 1) * n], a), &tr.state)
            .unwrap();
        lq += (qs - y).powi(2);
        let fit = l
            .critic
            .eval(&pick(&util, &tr.actions, a), &tr.state)
            .unwrap();
        sc += (fit - y).powi(2);

        // counterfactual inputs around the selected joint action
        let weights = l.mixer.weights(&tr.state);
        let mut cq = vec![0.0; n * a];
        for i in 0..n {
            for j in 0..a {
                if tr.avail[i * a + j] {
                    let mut u = p.uhat[k * n..(k + 1) * n].to_vec();
                    u[i] = j;
                    cq[i * a + j] = weights.eval(&pick(&util, &u, a)).unwrap();
                }
            }
        }
        samples.push(PolicySample {
            critic_w: l.critic.agent_weights(&tr.state),
            critic_b: l.critic.bias(&tr.state),
            q: cq,
            probs: probs[k * n * a..(k + 1) * n * a].to_vec(),
            avail: tr.avail.clone(),
        });
    }
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1.0);
    assert!(close(tape.scalar_value(losses.concaveq), lc / b));
    assert!(close(tape.scalar_value(losses.qstar.unwrap()), lq / b));
    assert!(close(
        tape.scalar_value(losses.soft_critic.unwrap()),
        sc / b
    ));
    let lp = loss_policy(&samples, l.alpha(), a).unwrap();
    assert!(close(tape.scalar_value(losses.policy.unwrap()), lp));

    let parts = tape.scalar_value(losses.concaveq)
        + tape.scalar_value(losses.qstar.unwrap())
        + tape.scalar_value(losses.policy.unwrap());
    assert!((tape.scalar_value(losses.total) - parts).abs() <= 1e-12);
}

#[test]
fn policy_loss_without_temperature_is_the_critic_value() {
    let sample = PolicySample {
        critic_w: vec![0.5, 2.0],
        critic_b: -1.0,
        q: vec![1.0, 3.0, -2.0, 4.0],
        probs: vec![0.25, 0.75, 0.6, 0.4],
        avail: vec![true; 4],
    };
    // 0.5 * (0.25 + 2.25) + 2 * (-1.2 + 1.6) - 1
    let expected = -(0.5 * 2.5 + 2.0 * 0.4 - 1.0);
    assert!((loss_policy(std::slice::from_ref(&sample), 0.0, 2).unwrap() - expected).abs() < 1e-12);
    // temperature only adds entropy bonuses, which are non-negative
    assert!(loss_policy(&[sample], 0.3, 2).unwrap() < expected);
}

#[test]
fn temperature_step_matches_finite_difference() {
    let pairs = [
        (1.2, 0.98 * 4f64.ln()),
        (0.3, 0.98 * 4f64.ln()),
        (0.9, 0.98 * 2f64.ln()),
    ];
    let objective = |log_alpha: f64| {
        let gap = pairs.iter().map(|(h, t)| h - t).sum::<f64>() / pairs.len() as f64;
        log_alpha.exp() * gap
    };
    for log_alpha in [-2.0, -0.07, 0.5] {
        let h = 1e-6;
        let grad = (objective(log_alpha + h) - objective(log_alpha - h)) / (2.0 * h);
        let expected = log_alpha - 3e-4 * grad;
        assert!((alpha_update(log_alpha, 3e-4, &pairs) - expected).abs() < 1e-10);
    }
}

#[test]
fn uniform_policy_over_four_actions_lowers_alpha() {
    let h = entropy(&[0.25; 4]);
    assert!((h - 4f64.ln()).abs() < 1e-15);
    assert!((target_entropy(4) - 0.98 * 4f64.ln()).abs() < 1e-15);
    let next = alpha_update(0.0, 0.1, &[(h, target_entropy(4))]);
    assert!((next - (-0.1 * 0.02 * 4f64.ln())).abs() < 1e-15);
}

#[test]
fn targets_copy_bitwise_on_schedule_and_stay_frozen_otherwise() {
    let mut t = trainer(Ablation::default(), 3);
    let initial: Vec<u64> = t
        .learner
        .targets
        .targets()
        .iter()
        .map(|p| p.checksum())
        .collect();
    for e in 1..=12u64 {
        // the copy happens before the episode's update, so it sees the
        // online networks as they were when the episode started
        let online: Vec<_> = [
            &t.learner.utility.params,
            t.learner.mixer.params(),
            &t.learner.qstar.params,
        ]
        .map(|p| p.clone())
        .to_vec();
        let before: Vec<u64> = t
            .learner
            .targets
            .targets()
            .iter()
            .map(|p| p.checksum())
            .collect();
        let records = episodes(&mut t, 1);
        let copied = records
            .iter()
            .any(|r| matches!(r, MetricsRecord::Episode(m) if m.target_copied));
        assert_eq!(copied, e % 5 == 0, "episode {e}");
        let targets: Vec<u64> = t
            .learner
            .targets
            .targets()
            .iter()
            .map(|p| p.checksum())
            .collect();
        if e < 5 {
            assert_eq!(targets, initial);
        }
        if copied {
            for (i, o) in online.iter().enumerate() {
                assert!(t.learner.targets.target(i) == o, "episode {e} group {i}");
            }
        } else {
            assert_eq!(targets, before, "episode {e}");
        }
    }
    assert_eq!(t.learner.targets.copies, 2);
}

fn nonzero(tape: &mut Tape, loss: Var, groups: &[Vec<Var>]) -> Vec<bool> {
    let g = tape.backward(loss).unwrap();
    groups
        .iter()
        .map(|vs| {
            vs.iter()
                .any(|v| g.get(*v).data().iter().any(|x| *x != 0.0))
        })
        .collect()
}

#[test]
fn each_loss_reaches_only_its_networks() {
    let l = drifted_learner();
    let batch = random_transitions(&l, 16, 2);
    let p = l.prepare(&batch).unwrap();
    let reach = |pick_loss: &dyn Fn(&concaveq::learner::LossVars) -> Var| {
        let mut tape = Tape::new();
        let v = bound_all(&l, &mut tape);
        let losses = l.build_losses(&mut tape, &vars(&v), &p).unwrap();
        let loss = pick_loss(&losses);
        nonzero(&mut tape, loss, &v)
    };
    // utility, mixer, qstar, critic, policy
    assert_eq!(reach(&|x| x.concaveq), [true, true, false, false, false]);
    assert_eq!(
        reach(&|x| x.qstar.unwrap()),
        [false, false, true, false, false]
    );
    assert_eq!(
        reach(&|x| x.soft_critic.unwrap()),
        [false, false, false, true, false]
    );
    assert_eq!(
        reach(&|x| x.policy.unwrap()),
        [false, false, false, true, true]
    );
}

#[test]
fn training_steps_touch_exactly_the_enabled_networks() {
    let cases = [
        (Ablation::default(), [true, true, true, true, true]),
        (
            Ablation {
                soft_policy: false,
                ..Ablation::default()
            },
            [true, true, true, false, false],
        ),
        (
            Ablation {
                central_qstar: false,
                ..Ablation::default()
            },
            [true, true, false, true, true],
        ),
        (
            Ablation {
                mixer: MixerKind::Monotonic,
                iter_selection: false,
                ..Ablation::default()
            },
            [true, true, true, true, true],
        ),
    ];
    for (ablation, expect) in cases {
        let mut t = trainer(ablation, 4);
        let before = checksums(&t.learner);
        let policy_before = t.learner.policy.params.clone();
        let records = episodes(&mut t, 20);
        assert!(records.iter().any(|r| matches!(r, MetricsRecord::Train(_))));
        let after = checksums(&t.learner);
        let changed: Vec<bool> = before.iter().zip(&after).map(|(x, y)| x != y).collect();
        assert_eq!(changed, expect, "{ablation:?}");
        if !ablation.soft_policy {
            assert_eq!(t.learner.policy.params, policy_before);
        }
        for r in &records {
            if let MetricsRecord::Train(m) = r {
                let parts = m.loss_policy + m.loss_qstar + m.loss_concaveq;
                assert!((m.loss_total - parts).abs() <= 1e-12, "{m:?}");
            }
        }
    }
}

#[test]
fn same_seed_gives_identical_metrics() {
    let run = |seed| {
        let mut t = trainer(Ablation::default(), seed);
        let mut lines = Vec::new();
        t.run(&mut |r| {
            lines.push(serde_json::to_string(r).unwrap());
            Ok(())
        })
        .unwrap();
        (lines, checksums(&t.learner))
    };
    let (a, ca) = run(8);
    let (b, cb) = run(8);
    assert_eq!(a, b);
    assert_eq!(ca, cb);
    let (c, _) = run(9);
    assert_ne!(a, c);
}

#[test]
fn checkpoint_round_trip_restores_every_tensor() {
    let mut t = trainer(Ablation::default(), 6);
    episodes(&mut t, 12);
    let ck = t.learner.checkpoint("meta");
    let bytes = ck.to_bytes();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes(), bytes);

    let mut fresh = trainer(Ablation::default(), 77).learner;
    assert_ne!(checksums(&fresh), checksums(&t.learner));
    fresh.restore(&back).unwrap();
    assert_eq!(checksums(&fresh), checksums(&t.learner));
    assert_eq!(fresh.log_alpha.to_bits(), t.learner.log_alpha.to_bits());
    assert_eq!(fresh.updates, t.learner.updates);
    assert_eq!(fresh.targets.targets(), t.learner.targets.targets());
    assert_eq!(fresh.checkpoint("meta").to_bytes(), bytes);

    let batch: Vec<Transition> = random_transitions(&fresh, 8, 1);
    let x = fresh.prepare(&batch).unwrap();
    let y = t.learner.prepare(&batch).unwrap();
    assert_eq!(x.targets, y.targets);
}

#[test]
fn availability_mask_limits_selection() {
    let l = probe_learner(2).unwrap();
    let util = vec![5.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0];
    let mut mask = vec![true; 12];
    mask[0] = false;
    let avail = Availability::new(4, mask).unwrap();
    let w = l.mixer.weights(&[0.1; 6]);
    let sel = l.select(&w, &util, &avail).unwrap();
    assert_ne!(sel.action.0[0], 0);
}

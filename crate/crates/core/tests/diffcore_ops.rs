//! Every tape op against central differences, plus backward determinism
//! and zero gradients off the loss path.

use concaveq::diffcore::{grad_check, GradCheck, OpKind, Tape, Tensor, Var};
use concaveq::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;
const TRIALS: usize = 100;

/// Random tensor whose entries stay at least `gap` away from zero, so the
/// kinks of relu and abs are never straddled by a finite-difference step.
fn away_from_zero(shape: &[usize], gap: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| {
            let m = rng.gen_range(gap..1.5);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn positive(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..len).map(|_| rng.gen_range(0.2..2.0)).collect(),
    )
    .unwrap()
}

/// `sum(c * out)` for a fixed random `c` drawn from `seed`.
fn project(tape: &mut Tape, out: Var, seed: u64) -> Result<Var> {
    let v = tape.value(out).clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Tensor::uniform(v.shape(), 1.0, &mut rng);
    let c = tape.constant(c);
    let p = tape.mul(out, c)?;
    Ok(tape.sum(p))
}

type Build = fn(&mut Tape, &[Var]) -> Result<Var>;

fn check_op(name: &str, inputs: impl Fn(&mut ChaCha8Rng) -> Vec<Tensor>, build: Build) {
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 7919);
    for trial in 0..TRIALS {
        let params = inputs(&mut rng);
        let names: Vec<String> = (0..params.len()).map(|i| format!("{name}.in{i}")).collect();
        let report = grad_check(
            |tape, vars| {
                let out = build(tape, vars)?;
                project(tape, out, trial as u64)
            },
            &names,
            &params,
            STEP,
            TOL,
        )
        .unwrap();
        assert!(report.passed, "{name} trial {trial}: {:?}", report.tensors);
    }
}

#[test]
fn affine_matches_finite_differences() {
    check_op(
        "affine",
        |r| {
            vec![
                Tensor::uniform(&[3, 4], 1.0, r),
                Tensor::uniform(&[3], 1.0, r),
                Tensor::uniform(&[5, 4], 1.0, r),
            ]
        },
        |t, v| t.affine(v[0], v[1], v[2]),
    );
    check_op(
        "affine_vec",
        |r| {
            vec![
                Tensor::uniform(&[2, 3], 1.0, r),
                Tensor::uniform(&[2], 1.0, r),
                Tensor::uniform(&[3], 1.0, r),
            ]
        },
        |t, v| t.forward_op(OpKind::Affine, v),
    );
    // one-hot rows take the index-loop path
    check_op(
        "affine_one_hot",
        |r| {
            vec![
                Tensor::uniform(&[3, 40], 1.0, r),
                Tensor::uniform(&[3], 1.0, r),
                one_hot_rows(2, 40, r),
            ]
        },
        |t, v| t.affine(v[0], v[1], v[2]),
    );
}

fn one_hot_rows(rows: usize, len: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let mut data = vec![0.0; rows * len];
    for r in 0..rows {
        data[r * len + rng.gen_range(0..len)] = rng.gen_range(0.5..1.5);
    }
    Tensor::new(vec![rows, len], data).unwrap()
}

#[test]
fn sparse_affine_matches_dense_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let (w, b, x) = (
            Tensor::uniform(&[6, 64], 1.0, &mut rng),
            Tensor::uniform(&[6], 1.0, &mut rng),
            one_hot_rows(3, 64, &mut rng),
        );
        let mut tape = Tape::new();
        let (wv, bv, xv) = (
            tape.param(w.clone()),
            tape.param(b.clone()),
            tape.constant(x.clone()),
        );
        let out = tape.affine(wv, bv, xv).unwrap();
        let loss = tape.sum(out);
        let grads = tape.backward(loss).unwrap();
        let (wd, bd, xd) = (w.data(), b.data(), x.data());
        for r in 0..3 {
            for i in 0..6 {
                let dense = bd[i]
                    + (0..64)
                        .map(|j| wd[i * 64 + j] * xd[r * 64 + j])
                        .sum::<f64>();
                assert!((tape.value(out).data()[r * 6 + i] - dense).abs() < 1e-12);
            }
        }
        assert!(grads.get(bv).data().iter().all(|g| (g - 3.0).abs() < 1e-12));
        let gw = grads.get(wv);
        for i in 0..6 {
            for j in 0..64 {
                let dense: f64 = (0..3).map(|r| xd[r * 64 + j]).sum();
                assert!((gw.data()[i * 64 + j] - dense).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn elementwise_unary_ops_match_finite_differences() {
    check_op(
        "relu",
        |r| vec![away_from_zero(&[6], 0.01, r)],
        |t, v| t.forward_op(OpKind::Relu, v),
    );
    check_op(
        "abs",
        |r| vec![away_from_zero(&[6], 0.01, r)],
        |t, v| t.forward_op(OpKind::Abs, v),
    );
    check_op(
        "neg",
        |r| vec![Tensor::uniform(&[6], 1.0, r)],
        |t, v| t.forward_op(OpKind::Neg, v),
    );
    check_op(
        "exp",
        |r| vec![Tensor::uniform(&[6], 1.0, r)],
        |t, v| t.forward_op(OpKind::Exp, v),
    );
    check_op(
        "log",
        |r| vec![positive(&[6], r)],
        |t, v| t.forward_op(OpKind::Log, v),
    );
    check_op(
        "scale",
        |r| vec![Tensor::uniform(&[6], 1.0, r)],
        |t, v| Ok(t.scale(v[0], -2.5)),
    );
}

#[test]
fn binary_ops_match_finite_differences() {
    let two = |r: &mut ChaCha8Rng| {
        vec![
            Tensor::uniform(&[2, 3], 1.0, r),
            Tensor::uniform(&[2, 3], 1.0, r),
        ]
    };
    check_op("add", two, |t, v| t.forward_op(OpKind::Add, v));
    check_op("sub", two, |t, v| t.sub(v[0], v[1]));
    check_op("mul", two, |t, v| t.forward_op(OpKind::Mul, v));
    // the same leaf on both sides accumulates both contributions
    check_op(
        "square",
        |r| vec![Tensor::uniform(&[4], 1.0, r)],
        |t, v| t.mul(v[0], v[0]),
    );
}

#[test]
fn reductions_and_softmax_match_finite_differences() {
    check_op(
        "sum",
        |r| vec![Tensor::uniform(&[3, 2], 1.0, r)],
        |t, v| t.forward_op(OpKind::Sum, v),
    );
    check_op(
        "softmax",
        |r| vec![Tensor::uniform(&[3, 4], 2.0, r)],
        |t, v| t.forward_op(OpKind::Softmax, v),
    );
    check_op(
        "log_softmax",
        |r| vec![Tensor::uniform(&[3, 4], 2.0, r)],
        |t, v| Ok(t.log_softmax(v[0])),
    );
    check_op(
        "sum_rows",
        |r| vec![Tensor::uniform(&[4, 3], 1.0, r)],
        |t, v| t.sum_rows(v[0]),
    );
}

#[test]
fn structural_ops_match_finite_differences() {
    check_op(
        "concat",
        |r| vec![Tensor::uniform(&[3], 1.0, r), Tensor::uniform(&[2], 1.0, r)],
        |t, v| t.forward_op(OpKind::Concat, v),
    );
    check_op(
        "concat_cols",
        |r| {
            vec![
                Tensor::uniform(&[3, 2], 1.0, r),
                Tensor::uniform(&[3, 1], 1.0, r),
                Tensor::uniform(&[3, 4], 1.0, r),
            ]
        },
        |t, v| t.concat_cols(v),
    );
    check_op(
        "reshape",
        |r| vec![Tensor::uniform(&[2, 6], 1.0, r)],
        |t, v| t.reshape(v[0], &[3, 4]),
    );
    check_op(
        "slice",
        |r| vec![Tensor::uniform(&[7], 1.0, r)],
        |t, v| t.slice(v[0], 2, 4),
    );
    check_op(
        "gather",
        |r| vec![Tensor::uniform(&[6], 1.0, r)],
        |t, v| t.gather(v[0], &[5, 0, 0, 3]),
    );
    check_op(
        "bmv",
        |r| {
            vec![
                Tensor::uniform(&[3, 2, 4], 1.0, r),
                Tensor::uniform(&[3, 4], 1.0, r),
            ]
        },
        |t, v| t.bmv(v[0], v[1]),
    );
}

#[test]
fn definitions_at_simple_points() {
    let mut t = Tape::new();
    let x = t.param(Tensor::vector(vec![-2.0, 0.0, -0.7]));
    let r = t.relu(x);
    let a = t.abs(x);
    assert_eq!(t.value(r).data(), &[0.0, 0.0, 0.0]);
    assert_eq!(t.value(a).data(), &[2.0, 0.0, 0.7]);
    let z = t.constant(Tensor::vector(vec![0.0; 3]));
    let s = t.softmax(z);
    for p in t.value(s).data() {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
    // subgradients at zero are zero for relu and abs
    let both = t.add(r, a).unwrap();
    let loss = t.sum(both);
    let g = t.backward(loss).unwrap().get(x);
    assert_eq!(g.data()[1], 0.0);

    let mut t = Tape::new();
    let x = t.param(Tensor::scalar(3.0));
    let sq = t.mul(x, x).unwrap();
    assert_eq!(t.backward(sq).unwrap().get(x).item(), 6.0);
}

#[test]
fn backward_is_bitwise_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t = Tape::new();
    let w = t.param(Tensor::uniform(&[8, 6], 1.0, &mut rng));
    let b = t.param(Tensor::uniform(&[8], 1.0, &mut rng));
    let x = t.constant(Tensor::uniform(&[16, 6], 1.0, &mut rng));
    let h = t.affine(w, b, x).unwrap();
    let h = t.relu(h);
    let s = t.log_softmax(h);
    let loss = t.sum(s);
    let g1 = t.backward(loss).unwrap();
    let g2 = t.backward(loss).unwrap();
    for v in [w, b] {
        assert_eq!(g1.get(v).checksum(), g2.get(v).checksum());
        assert_eq!(g1.get(v), g2.get(v));
    }
}

#[test]
fn nodes_off_the_loss_path_get_zero_gradient() {
    let mut t = Tape::new();
    let x = t.param(Tensor::vector(vec![1.0, 2.0]));
    let unused = t.param(Tensor::vector(vec![3.0, 4.0]));
    let _side = t.exp(unused);
    let loss = t.sum(x);
    let g = t.backward(loss).unwrap();
    assert_eq!(g.get(unused).data(), &[0.0, 0.0]);
    assert_eq!(g.get(x).data(), &[1.0, 1.0]);
}

#[test]
fn non_scalar_loss_and_shape_mismatch_are_errors() {
    let mut t = Tape::new();
    let x = t.param(Tensor::vector(vec![1.0, 2.0]));
    let y = t.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
    assert!(t.backward(x).is_err());
    let err = t.add(x, y).unwrap_err().to_string();
    assert!(err.contains("add"), "{err}");
    let w = t.param(Tensor::zeros(&[2, 5]));
    assert!(t.affine(w, x, y).is_err());
}

#[test]
fn corrupted_gradient_fails_and_quadratic_passes_tightly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = vec![Tensor::uniform(&[10], 1.0, &mut rng)];
    let names = vec!["x".to_string()];
    let f = |t: &mut Tape, v: &[Var]| -> Result<Var> {
        let sq = t.mul(v[0], v[0])?;
        Ok(t.sum(sq))
    };
    assert!(grad_check(f, &names, &p, 1e-5, 1e-6).unwrap().passed);
    let double = |g: &mut [Tensor]| {
        for v in g[0].data_mut() {
            *v *= 2.0;
        }
    };
    let report = GradCheck::new(1e-5, 1e-4)
        .unwrap()
        .with_hook(&double)
        .run(f, &names, &p)
        .unwrap();
    assert!(!report.passed);
    assert_eq!(report.failures().next().unwrap().name, "x");
}

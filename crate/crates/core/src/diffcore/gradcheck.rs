use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Worst relative error observed for one parameter tensor.
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TensorCheck> {
        self.tensors
            .iter()
            .filter(move |t| t.max_rel_error.is_nan() || t.max_rel_error >= self.tolerance)
    }
}

type GradHook<'a> = &'a dyn Fn(&mut [Tensor]);

/// Central-difference gradient checker.
///
/// The loss closure receives a fresh tape and one leaf per parameter tensor
/// and must return a scalar node. Relative error per element is
/// `|analytic - numeric| / max(1, |numeric|)`.
pub struct GradCheck<'a> {
    pub step: f64,
    pub tolerance: f64,
    /// Check at most this many evenly strided entries per tensor.
    pub max_entries: Option<usize>,
    hook: Option<GradHook<'a>>,
}

impl<'a> GradCheck<'a> {
    pub fn new(step: f64, tolerance: f64) -> Result<Self> {
        if step.is_nan() || step <= 0.0 || tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "grad_check needs step > 0 and tolerance > 0 (got {step}, {tolerance})"
            )));
        }
        Ok(Self {
            step,
            tolerance,
            max_entries: None,
            hook: None,
        })
    }

    pub fn max_entries(mut self, n: usize) -> Self {
        self.max_entries = Some(n.max(1));
        self
    }

    /// Lets tests tamper with analytic gradients before comparison.
    pub fn with_hook(mut self, hook: GradHook<'a>) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn run<F>(&self, loss_fn: F, names: &[String], params: &[Tensor]) -> Result<GradCheckReport>
    where
        F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    {
        assert_eq!(names.len(), params.len());
        let eval = |ps: &[Tensor]| -> Result<f64> {
            let mut tape = Tape::new();
            let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
            let loss = loss_fn(&mut tape, &vars)?;
            Ok(tape.scalar_value(loss))
        };

        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = loss_fn(&mut tape, &vars)?;
        let mut grads = tape.backward(loss)?;
        let mut analytic: Vec<Tensor> = vars.iter().map(|&v| grads.take(v)).collect();
        if let Some(hook) = self.hook {
            hook(&mut analytic);
        }

        let mut work = params.to_vec();
        let mut tensors = Vec::with_capacity(params.len());
        for (t, name) in names.iter().enumerate() {
            let len = params[t].len();
            let stride = match self.max_entries {
                Some(m) if len > m => len.div_ceil(m),
                _ => 1,
            };
            let mut worst = (0.0f64, 0usize);
            let mut checked = 0;
            for i in (0..len).step_by(stride) {
                let orig = work[t].data()[i];
                work[t].data_mut()[i] = orig + self.step;
                let plus = eval(&work)?;
                work[t].data_mut()[i] = orig - self.step;
                let minus = eval(&work)?;
                work[t].data_mut()[i] = orig;
                if !plus.is_finite() || !minus.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss at perturbed point of {name}[{i}]"
                    )));
                }
                let numeric = (plus - minus) / (2.0 * self.step);
                let err = (analytic[t].data()[i] - numeric).abs() / numeric.abs().max(1.0);
                if err > worst.0 || err.is_nan() {
                    worst = (err, i);
                }
                checked += 1;
            }
            tensors.push(TensorCheck {
                name: name.clone(),
                max_rel_error: worst.0,
                worst_index: worst.1,
                checked,
            });
        }
        let passed = tensors.iter().all(|t| t.max_rel_error < self.tolerance);
        Ok(GradCheckReport {
            tensors,
            tolerance: self.tolerance,
            passed,
        })
    }
}

/// Convenience wrapper over [`GradCheck`].
pub fn grad_check<F>(
    loss_fn: F,
    names: &[String],
    params: &[Tensor],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    GradCheck::new(step, tolerance)?.run(loss_fn, names, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic(tape: &mut Tape, vars: &[Var]) -> Result<Var> {
        // 0.5 * x^T x + sum(x)
        let sq = tape.mul(vars[0], vars[0])?;
        let half = tape.scale(sq, 0.5);
        let q = tape.sum(half);
        let s = tape.sum(vars[0]);
        let both = tape.concat(&[q, s])?;
        Ok(tape.sum(both))
    }

    #[test]
    fn quadratic_passes_tight_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::uniform(&[10], 2.0, &mut rng);
        let report = grad_check(quadratic, &["x".into()], &[x], 1e-5, 1e-6).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn corrupted_gradient_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Tensor::uniform(&[10], 2.0, &mut rng);
        let double = |g: &mut [Tensor]| {
            for v in g[0].data_mut() {
                *v *= 2.0;
            }
        };
        let report = GradCheck::new(1e-5, 1e-6)
            .unwrap()
            .with_hook(&double)
            .run(quadratic, &["x".into()], &[x])
            .unwrap();
        assert!(!report.passed);
        assert_eq!(report.failures().count(), 1);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(GradCheck::new(0.0, 1e-4).is_err());
        assert!(GradCheck::new(1e-5, -1.0).is_err());
    }

    #[test]
    fn non_finite_perturbation_names_index() {
        let x = Tensor::vector(vec![1e-6, 1.0]);
        let err = grad_check(
            |tape, v| {
                let l = tape.log(v[0]);
                Ok(tape.sum(l))
            },
            &["x".into()],
            &[x],
            1e-5,
            1e-4,
        )
        .unwrap_err();
        assert!(err.to_string().contains("x[0]"), "{err}");
    }
}

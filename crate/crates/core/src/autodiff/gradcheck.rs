//! Central finite-difference verification of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Coordinates sampled per parameter tensor; `usize::MAX` checks all.
    pub samples_per_tensor: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            samples_per_tensor: 16,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(tensor index, element index)` of the worst coordinate.
    pub worst: (usize, usize),
    pub checked: usize,
    pub passed: bool,
}

fn eval<F>(forward: &F, params: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p)).collect();
    let loss = forward(&mut tape, &vars)?;
    let v = tape.value(loss);
    if v.len() != 1 {
        return Err(invalid("grad_check forward must return a scalar"));
    }
    Ok(v[0])
}

/// Compares autodiff gradients of `forward` against central differences.
///
/// Error per coordinate is `|autodiff - fd| / max(|fd|, 1e-8)`. Non-finite
/// intermediates surface as [`Error::NonFinite`] naming the op.
pub fn grad_check<F>(params: &[Tensor], forward: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_with(params, forward, opts, |_| {})
}

/// As [`grad_check`], with a hook that can configure the analytic tape
/// (used for fault injection).
pub fn grad_check_with<F, H>(
    params: &[Tensor],
    forward: F,
    opts: GradCheckOptions,
    prepare: H,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    H: Fn(&mut Tape),
{
    let mut work: Vec<Tensor> = params.iter().map(|p| p.clone().requires_grad(true)).collect();

    let mut tape = Tape::new();
    prepare(&mut tape);
    let vars: Vec<Var> = work.iter().map(|p| tape.leaf(p)).collect();
    let loss = forward(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|&v| grads.get(v).map(|g| g.into_owned()))
        .collect::<Option<_>>()
        .ok_or_else(|| invalid("parameter did not receive a gradient"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = (0.0, (0, 0));
    let mut checked = 0;
    for ti in 0..work.len() {
        let n = work[ti].numel();
        let picks: Vec<usize> = if opts.samples_per_tensor >= n {
            (0..n).collect()
        } else {
            (0..opts.samples_per_tensor).map(|_| rng.random_range(0..n)).collect()
        };
        for j in picks {
            let orig = work[ti].data()[j];
            work[ti].data_mut()[j] = orig + opts.step;
            let up = eval(&forward, &work)?;
            work[ti].data_mut()[j] = orig - opts.step;
            let down = eval(&forward, &work)?;
            work[ti].data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * opts.step);
            if !fd.is_finite() {
                return Err(Error::NonFinite {
                    op: "finite_difference",
                    node: j,
                });
            }
            let err = (analytic[ti][j] - fd).abs() / fd.abs().max(1e-8);
            checked += 1;
            if err > worst.0 || checked == 1 {
                worst = (err, (ti, j));
            }
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        worst: worst.1,
        checked,
        passed: worst.0 < opts.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_is_exact() {
        // y = w * x via a 1x1 convolution; loss = mse(y, target).
        let w = Tensor::new(vec![1, 1, 1, 1], vec![0.7]).unwrap();
        let b = Tensor::new(vec![1], vec![0.0]).unwrap();
        let report = grad_check(
            &[w, b],
            |tape, p| {
                let x = tape.constant(vec![1, 1, 1, 3], vec![1.0, -2.0, 0.5])?;
                let t = tape.constant(vec![1, 1, 1, 3], vec![0.3, 0.1, -0.4])?;
                let y = tape.conv2d(x, p[0], p[1])?;
                tape.mse_loss(y, t)
            },
            GradCheckOptions {
                samples_per_tensor: usize::MAX,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-10, "{report:?}");
        assert_eq!(report.checked, 2);
    }
}

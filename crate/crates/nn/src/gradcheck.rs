//! Central-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{mse_grad, mse_loss, Differentiable, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Entries checked per parameter tensor; tensors with fewer entries are
    /// checked exhaustively.
    pub samples_per_param: usize,
    /// Lower bound on the denominator of the relative error, so gradients
    /// that are zero up to round-off do not produce spurious failures.
    pub magnitude_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            samples_per_param: 32,
            magnitude_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the gradient of `mse(model(input), target)` from `backward`
/// against central differences on a random subsample of parameter entries.
pub fn grad_check<M: Differentiable>(
    model: &mut M,
    input: &M::Input,
    target: &[f64],
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    model.zero_grad();
    let out = model.forward(input)?;
    model.backward(&mse_grad(&out, target)?)?;
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    let h = config.step;
    for (pi, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let picks: Vec<usize> = if n <= config.samples_per_param {
            (0..n).collect()
        } else {
            sample(&mut rng, n, config.samples_per_param).into_vec()
        };
        for k in picks {
            let original = model.params()[pi].value.data()[k];
            model.params_mut()[pi].value.data_mut()[k] = original + h;
            let plus = mse_loss(&model.forward(input)?, target)?;
            model.params_mut()[pi].value.data_mut()[k] = original - h;
            let minus = mse_loss(&model.forward(input)?, target)?;
            model.params_mut()[pi].value.data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(grads[k], numeric, config.magnitude_floor);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some((model.params()[pi].name.clone(), k));
            }
        }
    }
    Ok(report)
}

use crate::tensor::expect_len;
use crate::Result;

/// Mean squared error `(1/n) * sum (target - predicted)^2`.
pub fn mse_loss(predicted: &[f64], target: &[f64]) -> Result<f64> {
    expect_len(predicted.len(), target.len(), "mse loss")?;
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = predicted
        .iter()
        .zip(target)
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Ok(sum / predicted.len() as f64)
}

/// Gradient of [`mse_loss`] with respect to `predicted`.
pub fn mse_grad(predicted: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    expect_len(predicted.len(), target.len(), "mse grad")?;
    let n = predicted.len().max(1) as f64;
    Ok(predicted
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        // (1 + 4 + 0) / 3
        assert_relative_eq!(
            mse_loss(&[1.0, 2.0, 3.0], &[2.0, 4.0, 3.0]).unwrap(),
            5.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn shape_mismatch() {
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse_grad(&[1.0], &[]).is_err());
    }

    #[test]
    fn grad_matches_difference_quotient() {
        let p = [0.3, -1.2, 2.0];
        let t = [1.0, 0.5, -0.25];
        let g = mse_grad(&p, &t).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (mse_loss(&a, &t).unwrap() - mse_loss(&b, &t).unwrap()) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-7);
        }
    }
}

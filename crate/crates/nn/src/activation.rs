use crate::{NnError, Result};

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ReLU with a recorded activity mask for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn infer(x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| relu(v)).collect()
    }

    pub fn forward(&mut self, x: &[f64]) -> Vec<f64> {
        self.mask = Some(x.iter().map(|&v| v > 0.0).collect());
        Self::infer(x)
    }

    pub fn backward(&self, dy: &[f64]) -> Result<Vec<f64>> {
        let mask = self.mask.as_ref().ok_or(NnError::BackwardBeforeForward)?;
        crate::tensor::expect_len(dy.len(), mask.len(), "relu backward")?;
        Ok(dy
            .iter()
            .zip(mask)
            .map(|(&g, &on)| if on { g } else { 0.0 })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relu_masks_gradient() {
        let mut r = Relu::new();
        assert!(r.backward(&[1.0]).is_err());
        let y = r.forward(&[-1.0, 0.5, 0.0]);
        assert_eq!(y, vec![0.0, 0.5, 0.0]);
        assert_eq!(r.backward(&[3.0, 3.0, 3.0]).unwrap(), vec![0.0, 3.0, 0.0]);
    }
}

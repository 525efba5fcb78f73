use serde::{Deserialize, Serialize};

use crate::{NnError, Param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam with bias-corrected moment estimates. Moment buffers are created on
/// the first step and must keep matching the parameter list afterwards.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = config;
        let ok = learning_rate.is_finite()
            && learning_rate > 0.0
            && (0.0..1.0).contains(&beta1)
            && (0.0..1.0).contains(&beta2)
            && epsilon.is_finite()
            && epsilon >= 0.0;
        if !ok {
            return Err(NnError::InvalidConfig(format!("adam: {config:?}")));
        }
        Ok(Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update using the gradients stored in `params`.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        for p in params.iter() {
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFiniteGradient(p.name.clone()));
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(NnError::ShapeMismatch {
                context: "adam moments",
                expected: self.first.iter().map(Vec::len).collect(),
                got: params.iter().map(|p| p.len()).collect(),
            });
        }

        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let inv_c1 = 1.0 / (1.0 - b1.powi(t));
        let inv_c2 = 1.0 / (1.0 - b2.powi(t));
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let Param { value, grad, .. } = &mut **p;
            for (((x, &g), m), v) in value
                .data_mut()
                .iter_mut()
                .zip(grad.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m * inv_c1;
                let v_hat = *v * inv_c2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

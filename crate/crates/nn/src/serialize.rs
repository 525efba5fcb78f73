//! Self-describing JSON weight documents.

use serde::{Deserialize, Serialize};

use crate::{NnError, Param, Result, Tensor};

/// Format tag written into every weight document.
pub const WEIGHT_FORMAT: &str = "missbeam-weights/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Per-channel z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(channels: Vec<String>) -> Self {
        let n = channels.len();
        Self {
            channels,
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    pub fn normalize(&self, channel: usize, value: f64) -> f64 {
        (value - self.mean[channel]) / self.std[channel]
    }

    pub fn denormalize(&self, channel: usize, value: f64) -> f64 {
        value * self.std[channel] + self.mean[channel]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub format: String,
    pub seed: u64,
    pub tensors: Vec<NamedTensor>,
    pub normalization: Option<Normalization>,
}

impl WeightFile {
    pub fn capture<'a>(
        params: impl IntoIterator<Item = &'a Param>,
        seed: u64,
        normalization: Option<Normalization>,
    ) -> Self {
        Self {
            format: WEIGHT_FORMAT.to_string(),
            seed,
            tensors: params
                .into_iter()
                .map(|p| NamedTensor {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    values: p.value.data().to_vec(),
                })
                .collect(),
            normalization,
        }
    }

    /// Copies stored values into `params`, matching by name and shape.
    pub fn restore<'a>(&self, params: impl IntoIterator<Item = &'a mut Param>) -> Result<()> {
        if self.format != WEIGHT_FORMAT {
            return Err(NnError::WeightFile(format!(
                "unsupported format `{}`, expected `{WEIGHT_FORMAT}`",
                self.format
            )));
        }
        let mut seen = 0;
        for p in params {
            let t = self
                .tensors
                .iter()
                .find(|t| t.name == p.name)
                .ok_or_else(|| NnError::WeightFile(format!("missing tensor `{}`", p.name)))?;
            if t.shape != p.value.shape() {
                return Err(NnError::ShapeMismatch {
                    context: "weight restore",
                    expected: p.value.shape().to_vec(),
                    got: t.shape.clone(),
                });
            }
            p.value = Tensor::new(t.shape.clone(), t.values.clone())?;
            p.zero_grad();
            seen += 1;
        }
        if seen != self.tensors.len() {
            return Err(NnError::WeightFile(format!(
                "document holds {} tensors but the model has {seen}",
                self.tensors.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weight documents always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| NnError::WeightFile(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Differentiable, Mlp};

    #[test]
    fn round_trip_restores_exact_values() {
        let a = Mlp::new(&[3, 5, 2], 11);
        let doc = WeightFile::capture(a.params(), 11, None);
        let parsed = WeightFile::from_json(&doc.to_json()).unwrap();
        assert_eq!(parsed, doc);
        let mut b = Mlp::new(&[3, 5, 2], 99);
        parsed.restore(b.params_mut()).unwrap();
        let x = vec![0.1, -0.4, 2.0];
        assert_eq!(a.infer(&x).unwrap(), b.infer(&x).unwrap());
    }

    #[test]
    fn rejects_wrong_format_and_shape() {
        let a = Mlp::new(&[3, 5, 2], 1);
        let mut doc = WeightFile::capture(a.params(), 1, None);
        doc.format = "other".into();
        let mut b = Mlp::new(&[3, 5, 2], 1);
        assert!(doc.restore(b.params_mut()).is_err());
        let doc = WeightFile::capture(a.params(), 1, None);
        let mut c = Mlp::new(&[3, 4, 2], 1);
        assert!(doc.restore(c.params_mut()).is_err());
    }
}

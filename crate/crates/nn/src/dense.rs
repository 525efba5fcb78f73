use crate::tensor::{axpy, dot, expect_len};
use crate::{Initializer, NnError, Param, Result, Tensor};

/// Fully connected layer `y = x W + b` with `W` stored as `in x out`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    input: Option<Vec<f64>>,
}

impl Dense {
    pub fn new(name: &str, inputs: usize, outputs: usize, init: &mut Initializer) -> Self {
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                init.uniform(&[inputs, outputs], inputs),
            ),
            bias: Param::new(format!("{name}.bias"), init.uniform(&[outputs], inputs)),
            input: None,
        }
    }

    pub fn from_parts(name: &str, weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(NnError::ShapeMismatch {
                context: "dense parts",
                expected: vec![weight.shape().get(1).copied().unwrap_or(0)],
                got: bias.shape().to_vec(),
            });
        }
        Ok(Self {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            input: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        expect_len(x.len(), self.inputs(), "dense input")?;
        let mut y = self.bias.value.data().to_vec();
        let w = &self.weight.value;
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(&mut y, xi, w.row(i));
            }
        }
        Ok(y)
    }

    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.infer(x)?;
        self.input = Some(x.to_vec());
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `d loss / d x`.
    pub fn backward(&mut self, dy: &[f64]) -> Result<Vec<f64>> {
        let x = self.input.as_ref().ok_or(NnError::BackwardBeforeForward)?;
        expect_len(dy.len(), self.outputs(), "dense backward")?;
        let out = self.outputs();
        for (i, &xi) in x.iter().enumerate() {
            axpy(&mut self.weight.grad[i * out..(i + 1) * out], xi, dy);
        }
        axpy(&mut self.bias.grad, 1.0, dy);
        let w = &self.weight.value;
        Ok((0..x.len()).map(|i| dot(w.row(i), dy)).collect())
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

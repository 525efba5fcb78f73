use crate::{Dense, Differentiable, Initializer, Param, Relu, Result};

/// Dense network with ReLU between layers and a linear output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Dense>,
    activations: Vec<Relu>,
}

impl Mlp {
    /// `sizes` lists the input width followed by every layer's output width.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        let mut init = Initializer::new(seed);
        let layers: Vec<Dense> = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| Dense::new(&format!("dense{k}"), w[0], w[1], &mut init))
            .collect();
        let activations = vec![Relu::new(); layers.len().saturating_sub(1)];
        Self {
            layers,
            activations,
        }
    }

    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.infer(&h)?;
            if k + 1 < self.layers.len() {
                h = Relu::infer(&h);
            }
        }
        Ok(h)
    }
}

impl Differentiable for Mlp {
    type Input = Vec<f64>;

    fn forward(&mut self, input: &Vec<f64>) -> Result<Vec<f64>> {
        let mut h = input.clone();
        let n = self.layers.len();
        for k in 0..n {
            h = self.layers[k].forward(&h)?;
            if k + 1 < n {
                h = self.activations[k].forward(&h);
            }
        }
        Ok(h)
    }

    fn backward(&mut self, grad_output: &[f64]) -> Result<()> {
        let mut g = grad_output.to_vec();
        for k in (0..self.layers.len()).rev() {
            if k + 1 < self.layers.len() {
                g = self.activations[k].backward(&g)?;
            }
            g = self.layers[k].backward(&g)?;
        }
        Ok(())
    }

    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Dense::params).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Dense::params_mut).collect()
    }
}

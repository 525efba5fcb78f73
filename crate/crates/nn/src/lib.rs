//! A deliberately small neural-network engine: dense, 1-D convolution and LSTM
//! layers with hand-written reverse-mode gradients, MSE loss, Adam, and a
//! central-difference gradient checker.
//!
//! Everything runs on `f64` and on a single sample at a time. Mini-batches are
//! formed by accumulating gradients over several forward/backward passes
//! before an optimizer step.

pub mod activation;
pub mod adam;
pub mod conv1d;
pub mod dense;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod lstm;
pub mod mlp;
pub mod param;
pub mod serialize;
pub mod tensor;

pub use activation::{relu, Relu};
pub use adam::{Adam, AdamConfig};
pub use conv1d::{conv1d_forward, Conv1d, Conv1dParams};
pub use dense::Dense;
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use init::Initializer;
pub use loss::{mse_grad, mse_loss};
pub use lstm::{lstm_cell_step, Gate, Lstm, LstmCellParams, LstmStep};
pub use mlp::Mlp;
pub use param::Param;
pub use serialize::{NamedTensor, Normalization, WeightFile, WEIGHT_FORMAT};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("backward called before a forward pass was recorded")]
    BackwardBeforeForward,
    #[error("kernel of length {kernel} does not fit padded input of length {padded}")]
    KernelTooLong { kernel: usize, padded: usize },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("weight file: {0}")]
    WeightFile(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

/// A model that can record a forward pass and back-propagate a gradient of
/// the loss with respect to its output into its parameters.
pub trait Differentiable {
    type Input;

    /// Runs a forward pass and records what `backward` needs.
    fn forward(&mut self, input: &Self::Input) -> Result<Vec<f64>>;

    /// Accumulates `d loss / d params` given `d loss / d output` of the most
    /// recent forward pass.
    fn backward(&mut self, grad_output: &[f64]) -> Result<()>;

    fn params(&self) -> Vec<&Param>;

    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

//! The two-head regression network.

use missbeam_nn::{Conv1d, Dense, Differentiable, Initializer, Lstm, NnError, Param, Relu, Tensor};

use super::{Architecture, ModelSpec};
use crate::error::Result;

/// Normalized network input: the past window (`steps x channels`) and the
/// currently available beams in ascending beam order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub sequence: Tensor,
    pub available: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Head {
    Lstm {
        lstm: Lstm,
        projection: Dense,
        relu: Relu,
    },
    Cnn {
        conv1: Conv1d,
        relu1: Relu,
        conv2: Conv1d,
        relu2: Relu,
        /// `[channels, steps]` shape of the second convolution's output.
        out_shape: [usize; 2],
    },
}

impl Head {
    fn infer(&self, seq: &Tensor) -> missbeam_nn::Result<Vec<f64>> {
        match self {
            Head::Lstm { lstm, projection, .. } => {
                Ok(Relu::infer(&projection.infer(&lstm.infer(seq)?)?))
            }
            Head::Cnn { conv1, conv2, .. } => {
                let x = seq.transpose2();
                let a = relu_tensor(conv1.infer(&x)?);
                Ok(Relu::infer(conv2.infer(&a)?.data()))
            }
        }
    }

    fn forward(&mut self, seq: &Tensor) -> missbeam_nn::Result<Vec<f64>> {
        match self {
            Head::Lstm {
                lstm,
                projection,
                relu,
            } => {
                let h = lstm.forward(seq)?;
                Ok(relu.forward(&projection.forward(&h)?))
            }
            Head::Cnn {
                conv1,
                relu1,
                conv2,
                relu2,
                out_shape,
            } => {
                let x = seq.transpose2();
                let a = conv1.forward(&x)?;
                let shape = a.shape().to_vec();
                let a = Tensor::new(shape, relu1.forward(a.data()))?;
                let b = conv2.forward(&a)?;
                *out_shape = [b.shape()[0], b.shape()[1]];
                Ok(relu2.forward(b.data()))
            }
        }
    }

    fn backward(&mut self, dy: &[f64]) -> missbeam_nn::Result<()> {
        match self {
            Head::Lstm {
                lstm,
                projection,
                relu,
            } => {
                let g = projection.backward(&relu.backward(dy)?)?;
                lstm.backward(&g)
            }
            Head::Cnn {
                conv1,
                relu1,
                conv2,
                relu2,
                out_shape,
            } => {
                let g = Tensor::new(out_shape.to_vec(), relu2.backward(dy)?)?;
                let ga = conv2.backward(&g)?;
                let shape = ga.shape().to_vec();
                let ga = Tensor::new(shape, relu1.backward(ga.data())?)?;
                conv1.backward(&ga)?;
                Ok(())
            }
        }
    }

    fn params(&self) -> Vec<&Param> {
        match self {
            Head::Lstm { lstm, projection, .. } => {
                let mut p = lstm.params();
                p.extend(projection.params());
                p
            }
            Head::Cnn { conv1, conv2, .. } => {
                let mut p = conv1.params();
                p.extend(conv2.params());
                p
            }
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Head::Lstm { lstm, projection, .. } => {
                let mut p = lstm.params_mut();
                p.extend(projection.params_mut());
                p
            }
            Head::Cnn { conv1, conv2, .. } => {
                let mut p = conv1.params_mut();
                p.extend(conv2.params_mut());
                p
            }
        }
    }
}

fn relu_tensor(t: Tensor) -> Tensor {
    let shape = t.shape().to_vec();
    Tensor::new(shape, Relu::infer(t.data())).expect("shape unchanged")
}

/// Head 1 over the past window, optionally concatenated with the available
/// beams (head 2), followed by fully connected layers with ReLU between them
/// and a linear output of one value per missing beam.
#[derive(Debug, Clone)]
pub struct Network {
    head: Head,
    multihead: bool,
    head_width: usize,
    available_width: usize,
    window_size: usize,
    channels: usize,
    fc: Vec<Dense>,
    fc_relu: Vec<Relu>,
}

impl Network {
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut init = Initializer::new(seed);
        let channels = spec.extras.channels();
        let n = spec.window_size;
        let (head, head_width) = match spec.architecture {
            Architecture::LstmMultihead | Architecture::LstmSinglehead => (
                Head::Lstm {
                    lstm: Lstm::new("lstm", channels, spec.hidden_size, &mut init),
                    projection: Dense::new("lstm_output", spec.hidden_size, spec.lstm_output_size, &mut init),
                    relu: Relu::new(),
                },
                spec.lstm_output_size,
            ),
            Architecture::CnnMultihead | Architecture::CnnSinglehead => {
                let [c1, c2] = spec.conv_channels;
                let k = spec.conv_kernel;
                let pad = spec.conv_padding();
                let conv1 = Conv1d::new("conv1", channels, c1, k, 1, pad, &mut init)?;
                let len1 = conv1.output_len(n).ok_or(NnError::KernelTooLong {
                    kernel: k,
                    padded: n + 2 * pad,
                })?;
                let conv2 = Conv1d::new("conv2", c1, c2, k, 1, pad, &mut init)?;
                let len2 = conv2.output_len(len1).ok_or(NnError::KernelTooLong {
                    kernel: k,
                    padded: len1 + 2 * pad,
                })?;
                (
                    Head::Cnn {
                        conv1,
                        relu1: Relu::new(),
                        conv2,
                        relu2: Relu::new(),
                        out_shape: [c2, len2],
                    },
                    c2 * len2,
                )
            }
        };
        let multihead = spec.architecture.is_multihead();
        let available_width = if multihead { spec.available_width() } else { 0 };
        let mut sizes = vec![head_width + available_width];
        sizes.extend(&spec.fc_layer_sizes);
        sizes.push(spec.missing.len());
        let fc: Vec<Dense> = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| Dense::new(&format!("fc{k}"), w[0], w[1], &mut init))
            .collect();
        let fc_relu = vec![Relu::new(); fc.len() - 1];
        Ok(Self {
            head,
            multihead,
            head_width,
            available_width,
            window_size: n,
            channels,
            fc,
            fc_relu,
        })
    }

    /// Width of the head-1 output.
    pub fn head_width(&self) -> usize {
        self.head_width
    }

    /// Width of the head-2 input (zero for single-head networks).
    pub fn available_width(&self) -> usize {
        self.available_width
    }

    /// `[steps, channels]` expected for the sequence input.
    pub fn sequence_shape(&self) -> [usize; 2] {
        [self.window_size, self.channels]
    }

    pub fn output_width(&self) -> usize {
        self.fc.last().expect("at least one layer").outputs()
    }

    fn check(&self, input: &NetInput) -> missbeam_nn::Result<()> {
        if input.sequence.shape() != self.sequence_shape() {
            return Err(NnError::ShapeMismatch {
                context: "network sequence input",
                expected: self.sequence_shape().to_vec(),
                got: input.sequence.shape().to_vec(),
            });
        }
        let expected = if self.multihead { self.available_width } else { input.available.len() };
        if input.available.len() != expected {
            return Err(NnError::ShapeMismatch {
                context: "network available-beam input",
                expected: vec![expected],
                got: vec![input.available.len()],
            });
        }
        Ok(())
    }

    fn concat(&self, head: Vec<f64>, input: &NetInput) -> Vec<f64> {
        let mut z = head;
        if self.multihead {
            z.extend_from_slice(&input.available);
        }
        z
    }

    /// Forward pass without recording state.
    pub fn infer(&self, input: &NetInput) -> missbeam_nn::Result<Vec<f64>> {
        self.check(input)?;
        let mut z = self.concat(self.head.infer(&input.sequence)?, input);
        for (k, layer) in self.fc.iter().enumerate() {
            z = layer.infer(&z)?;
            if k + 1 < self.fc.len() {
                z = Relu::infer(&z);
            }
        }
        Ok(z)
    }
}

impl Differentiable for Network {
    type Input = NetInput;

    fn forward(&mut self, input: &NetInput) -> missbeam_nn::Result<Vec<f64>> {
        self.check(input)?;
        let head = self.head.forward(&input.sequence)?;
        let mut z = self.concat(head, input);
        let n = self.fc.len();
        for k in 0..n {
            z = self.fc[k].forward(&z)?;
            if k + 1 < n {
                z = self.fc_relu[k].forward(&z);
            }
        }
        Ok(z)
    }

    fn backward(&mut self, grad_output: &[f64]) -> missbeam_nn::Result<()> {
        let mut g = grad_output.to_vec();
        for k in (0..self.fc.len()).rev() {
            if k + 1 < self.fc.len() {
                g = self.fc_relu[k].backward(&g)?;
            }
            g = self.fc[k].backward(&g)?;
        }
        g.truncate(self.head_width);
        self.head.backward(&g)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.head.params();
        p.extend(self.fc.iter().flat_map(Dense::params));
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.head.params_mut();
        p.extend(self.fc.iter_mut().flat_map(Dense::params_mut));
        p
    }
}

use crate::{Initializer, NnError, Param, Result, Tensor};

/// Weights of a 1-D convolution: kernels are `out_channels x in_channels x kernel_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dParams {
    pub kernels: Tensor,
    pub biases: Tensor,
    pub stride: usize,
    pub padding: usize,
}

/// Cross-correlation of a `channels x length` input with the kernels:
/// `y[o][t] = b[o] + sum_c sum_k x[c][t*stride + k] * w[o][c][k]` over the
/// zero-padded input (no kernel flip).
pub fn conv1d_forward(params: &Conv1dParams, x: &Tensor) -> Result<Tensor> {
    correlate(
        &params.kernels,
        params.biases.data(),
        params.stride,
        params.padding,
        x,
    )
    .map(|(y, _)| y)
}

fn check_geometry(kernels: &Tensor, stride: usize, x: &Tensor) -> Result<()> {
    if kernels.rank() != 3 {
        return Err(NnError::InvalidConfig(format!(
            "conv1d kernels must be rank 3, got shape {:?}",
            kernels.shape()
        )));
    }
    if kernels.shape()[2] == 0 || stride == 0 {
        return Err(NnError::InvalidConfig(
            "conv1d kernel length and stride must be at least 1".into(),
        ));
    }
    if x.rank() != 2 || x.shape()[0] != kernels.shape()[1] {
        return Err(NnError::ShapeMismatch {
            context: "conv1d input channels",
            expected: vec![kernels.shape()[1]],
            got: x.shape().to_vec(),
        });
    }
    Ok(())
}

fn pad(x: &Tensor, padding: usize) -> Tensor {
    let (ch, len) = (x.shape()[0], x.shape()[1]);
    let plen = len + 2 * padding;
    let mut data = vec![0.0; ch * plen];
    for c in 0..ch {
        data[c * plen + padding..c * plen + padding + len].copy_from_slice(x.row(c));
    }
    Tensor::new(vec![ch, plen], data).expect("padded shape")
}

fn correlate(
    kernels: &Tensor,
    biases: &[f64],
    stride: usize,
    padding: usize,
    x: &Tensor,
) -> Result<(Tensor, Tensor)> {
    check_geometry(kernels, stride, x)?;
    let (out_ch, in_ch, k) = (kernels.shape()[0], kernels.shape()[1], kernels.shape()[2]);
    let xp = pad(x, padding);
    let plen = xp.shape()[1];
    if k > plen {
        return Err(NnError::KernelTooLong {
            kernel: k,
            padded: plen,
        });
    }
    let out_len = (plen - k) / stride + 1;
    let w = kernels.data();
    let mut y = vec![0.0; out_ch * out_len];
    for o in 0..out_ch {
        for t in 0..out_len {
            let mut s = biases[o];
            for c in 0..in_ch {
                let xr = &xp.row(c)[t * stride..t * stride + k];
                let wr = &w[(o * in_ch + c) * k..(o * in_ch + c + 1) * k];
                s += xr.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
            }
            y[o * out_len + t] = s;
        }
    }
    Ok((Tensor::new(vec![out_ch, out_len], y)?, xp))
}

/// Trainable 1-D convolution layer.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub kernels: Param,
    pub biases: Param,
    pub stride: usize,
    pub padding: usize,
    padded_input: Option<Tensor>,
}

impl Conv1d {
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        stride: usize,
        padding: usize,
        init: &mut Initializer,
    ) -> Result<Self> {
        if kernel_len == 0 || stride == 0 {
            return Err(NnError::InvalidConfig(
                "conv1d kernel length and stride must be at least 1".into(),
            ));
        }
        let fan_in = in_channels * kernel_len;
        Ok(Self {
            kernels: Param::new(
                format!("{name}.kernels"),
                init.uniform(&[out_channels, in_channels, kernel_len], fan_in),
            ),
            biases: Param::new(format!("{name}.biases"), init.uniform(&[out_channels], fan_in)),
            stride,
            padding,
            padded_input: None,
        })
    }

    pub fn from_params(name: &str, p: Conv1dParams) -> Result<Self> {
        if p.kernels.rank() != 3 || p.biases.shape() != [p.kernels.shape()[0]] {
            return Err(NnError::InvalidConfig("conv1d parameter shapes".into()));
        }
        if p.kernels.shape()[2] == 0 || p.stride == 0 {
            return Err(NnError::InvalidConfig(
                "conv1d kernel length and stride must be at least 1".into(),
            ));
        }
        Ok(Self {
            kernels: Param::new(format!("{name}.kernels"), p.kernels),
            biases: Param::new(format!("{name}.biases"), p.biases),
            stride: p.stride,
            padding: p.padding,
            padded_input: None,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.value.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.value.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.value.shape()[2]
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        let plen = input_len + 2 * self.padding;
        (plen >= self.kernel_len()).then(|| (plen - self.kernel_len()) / self.stride + 1)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        correlate(
            &self.kernels.value,
            self.biases.value.data(),
            self.stride,
            self.padding,
            x,
        )
        .map(|(y, _)| y)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (y, xp) = correlate(
            &self.kernels.value,
            self.biases.value.data(),
            self.stride,
            self.padding,
            x,
        )?;
        self.padded_input = Some(xp);
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `d loss / d x` (unpadded).
    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let xp = self
            .padded_input
            .as_ref()
            .ok_or(NnError::BackwardBeforeForward)?;
        let (out_ch, in_ch, k) = (self.out_channels(), self.in_channels(), self.kernel_len());
        let plen = xp.shape()[1];
        let out_len = (plen - k) / self.stride + 1;
        dy.expect_shape(&[out_ch, out_len], "conv1d backward")?;
        let w = self.kernels.value.data();
        let mut dxp = vec![0.0; in_ch * plen];
        for o in 0..out_ch {
            for t in 0..out_len {
                let g = dy.at2(o, t);
                if g == 0.0 {
                    continue;
                }
                self.biases.grad[o] += g;
                for c in 0..in_ch {
                    let base = (o * in_ch + c) * k;
                    let start = t * self.stride;
                    let xr = &xp.row(c)[start..start + k];
                    for j in 0..k {
                        self.kernels.grad[base + j] += g * xr[j];
                        dxp[c * plen + start + j] += g * w[base + j];
                    }
                }
            }
        }
        let len = plen - 2 * self.padding;
        let mut dx = vec![0.0; in_ch * len];
        for c in 0..in_ch {
            dx[c * len..(c + 1) * len]
                .copy_from_slice(&dxp[c * plen + self.padding..c * plen + self.padding + len]);
        }
        Tensor::new(vec![in_ch, len], dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.kernels, &self.biases]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.kernels, &mut self.biases]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: &[f64], stride: usize, padding: usize) -> Conv1dParams {
        Conv1dParams {
            kernels: Tensor::new(vec![1, 1, w.len()], w.to_vec()).unwrap(),
            biases: Tensor::vector(vec![0.0]),
            stride,
            padding,
        }
    }

    fn row(v: &[f64]) -> Tensor {
        Tensor::new(vec![1, v.len()], v.to_vec()).unwrap()
    }

    /// Sliding-window oracle: y_t = sum_{k=1..p} x_{t+k-1} w_k over the padded input.
    fn oracle(x: &[f64], w: &[f64], stride: usize, padding: usize) -> Vec<f64> {
        let mut xp = vec![0.0; padding];
        xp.extend_from_slice(x);
        xp.extend(std::iter::repeat_n(0.0, padding));
        let mut out = Vec::new();
        let mut t = 0;
        while t + w.len() <= xp.len() {
            let mut s = 0.0;
            for k in 1..=w.len() {
                s += xp[t + k - 1] * w[k - 1];
            }
            out.push(s);
            t += stride;
        }
        out
    }

    #[test]
    fn examples() {
        let y = conv1d_forward(&single(&[2.0, 1.0], 1, 0), &row(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data(), oracle(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0], 1, 0).as_slice());
        assert_eq!(y.data(), &[4.0, 7.0, 10.0]);

        let x = [0.3, -1.0, 2.5, 7.0];
        let y = conv1d_forward(&single(&[1.0], 1, 0), &row(&x)).unwrap();
        assert_eq!(y.data(), &x);

        let y = conv1d_forward(&single(&[1.0, 1.0], 1, 1), &row(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(y.data(), oracle(&[1.0, 1.0, 1.0], &[1.0, 1.0], 1, 1).as_slice());
        assert_eq!(y.data(), &[1.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn strided_output_length() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = conv1d_forward(&single(&[1.0, -1.0, 0.5], 2, 1), &row(&x)).unwrap();
        // (7 + 2 - 3) / 2 + 1
        assert_eq!(y.shape(), &[1, 4]);
        assert_eq!(y.data(), oracle(&x, &[1.0, -1.0, 0.5], 2, 1).as_slice());
    }

    #[test]
    fn kernel_longer_than_padded_input() {
        let err = conv1d_forward(&single(&[1.0; 5], 1, 1), &row(&[1.0, 2.0])).unwrap_err();
        assert_eq!(err, NnError::KernelTooLong { kernel: 5, padded: 4 });
    }

    #[test]
    fn channel_mismatch() {
        let p = single(&[1.0], 1, 0);
        let x = Tensor::zeros(&[2, 3]);
        assert!(matches!(conv1d_forward(&p, &x), Err(NnError::ShapeMismatch { .. })));
    }
}

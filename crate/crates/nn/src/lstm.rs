//! LSTM cell and a single-layer LSTM unrolled over a sequence with
//! backpropagation through time.
//!
//! Gate pre-activations use the row-vector convention `x U + h W + b`. The
//! four gates are packed column-wise in the order forget, input, candidate,
//! output: `U` is `input x 4H`, `W` is `H x 4H` and `b` has `4H` entries.

use std::ops::Range;

use crate::activation::sigmoid;
use crate::tensor::{axpy, dot, expect_len};
use crate::{Initializer, NnError, Param, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget,
    Input,
    Candidate,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    /// Column range of this gate inside the packed `4H` layout.
    pub fn columns(self, hidden: usize) -> Range<usize> {
        let k = self as usize;
        k * hidden..(k + 1) * hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input_weights: Tensor,
    pub recurrent_weights: Tensor,
    pub bias: Tensor,
    pub hidden_size: usize,
}

impl LstmCellParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_weights: Tensor::zeros(&[input_size, 4 * hidden_size]),
            recurrent_weights: Tensor::zeros(&[hidden_size, 4 * hidden_size]),
            bias: Tensor::zeros(&[4 * hidden_size]),
            hidden_size,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_weights.shape()[0]
    }

    /// Mutable view of one gate's bias block.
    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let cols = gate.columns(self.hidden_size);
        &mut self.bias.data_mut()[cols]
    }

    fn validate(&self) -> Result<()> {
        let h = self.hidden_size;
        if self.input_weights.rank() != 2 || self.input_weights.shape()[1] != 4 * h {
            return Err(NnError::ShapeMismatch {
                context: "lstm input weights",
                expected: vec![self.input_weights.shape()[0], 4 * h],
                got: self.input_weights.shape().to_vec(),
            });
        }
        self.recurrent_weights
            .expect_shape(&[h, 4 * h], "lstm recurrent weights")?;
        self.bias.expect_shape(&[4 * h], "lstm bias")
    }
}

/// Gate activations and states produced by one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub cell: Vec<f64>,
    pub cell_tanh: Vec<f64>,
    pub hidden: Vec<f64>,
}

fn step_raw(
    u: &Tensor,
    w: &Tensor,
    b: &[f64],
    hidden: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> LstmStep {
    let mut z = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            axpy(&mut z, xi, u.row(i));
        }
    }
    for (i, &hi) in h_prev.iter().enumerate() {
        if hi != 0.0 {
            axpy(&mut z, hi, w.row(i));
        }
    }
    let forget: Vec<f64> = z[Gate::Forget.columns(hidden)].iter().map(|&v| sigmoid(v)).collect();
    let input: Vec<f64> = z[Gate::Input.columns(hidden)].iter().map(|&v| sigmoid(v)).collect();
    let candidate: Vec<f64> = z[Gate::Candidate.columns(hidden)].iter().map(|v| v.tanh()).collect();
    let output: Vec<f64> = z[Gate::Output.columns(hidden)].iter().map(|&v| sigmoid(v)).collect();
    let cell: Vec<f64> = (0..hidden)
        .map(|j| forget[j] * c_prev[j] + input[j] * candidate[j])
        .collect();
    let cell_tanh: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
    let hidden_out = (0..hidden).map(|j| output[j] * cell_tanh[j]).collect();
    LstmStep {
        forget,
        input,
        candidate,
        output,
        cell,
        cell_tanh,
        hidden: hidden_out,
    }
}

/// One LSTM cell update:
///
/// ```text
/// f = σ(x U^f + h W^f + b_f)     i = σ(x U^i + h W^i + b_i)
/// g = tanh(x U^g + h W^g + b_g)  o = σ(x U^o + h W^o + b_o)
/// c' = f ∘ c + i ∘ g             h' = o ∘ tanh(c')
/// ```
pub fn lstm_cell_step(
    params: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<LstmStep> {
    params.validate()?;
    expect_len(x.len(), params.input_size(), "lstm step input")?;
    expect_len(h_prev.len(), params.hidden_size, "lstm step hidden state")?;
    expect_len(c_prev.len(), params.hidden_size, "lstm step cell state")?;
    Ok(step_raw(
        &params.input_weights,
        &params.recurrent_weights,
        params.bias.data(),
        params.hidden_size,
        x,
        h_prev,
        c_prev,
    ))
}

/// Single-layer LSTM over a `steps x input` sequence, starting from zero
/// states and returning the final hidden state.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub input_weights: Param,
    pub recurrent_weights: Param,
    pub bias: Param,
    hidden_size: usize,
    trace: Option<Box<Trace>>,
}

#[derive(Debug, Clone)]
struct Trace {
    inputs: Vec<Vec<f64>>,
    steps: Vec<LstmStep>,
}

impl Lstm {
    pub fn new(name: &str, input_size: usize, hidden_size: usize, init: &mut Initializer) -> Self {
        let four_h = 4 * hidden_size;
        Self {
            input_weights: Param::new(
                format!("{name}.input_weights"),
                init.uniform(&[input_size, four_h], input_size),
            ),
            recurrent_weights: Param::new(
                format!("{name}.recurrent_weights"),
                init.uniform(&[hidden_size, four_h], hidden_size),
            ),
            bias: Param::new(format!("{name}.bias"), init.uniform(&[four_h], hidden_size)),
            hidden_size,
            trace: None,
        }
    }

    pub fn from_params(name: &str, p: LstmCellParams) -> Result<Self> {
        p.validate()?;
        Ok(Self {
            input_weights: Param::new(format!("{name}.input_weights"), p.input_weights),
            recurrent_weights: Param::new(format!("{name}.recurrent_weights"), p.recurrent_weights),
            bias: Param::new(format!("{name}.bias"), p.bias),
            hidden_size: p.hidden_size,
            trace: None,
        })
    }

    pub fn cell_params(&self) -> LstmCellParams {
        LstmCellParams {
            input_weights: self.input_weights.value.clone(),
            recurrent_weights: self.recurrent_weights.value.clone(),
            bias: self.bias.value.clone(),
            hidden_size: self.hidden_size,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn input_size(&self) -> usize {
        self.input_weights.value.shape()[0]
    }

    fn run(&self, seq: &Tensor) -> Result<Trace> {
        if seq.rank() != 2 || seq.shape()[1] != self.input_size() {
            return Err(NnError::ShapeMismatch {
                context: "lstm sequence",
                expected: vec![seq.shape().first().copied().unwrap_or(0), self.input_size()],
                got: seq.shape().to_vec(),
            });
        }
        if seq.shape()[0] == 0 {
            return Err(NnError::InvalidConfig("lstm sequence must not be empty".into()));
        }
        let h = self.hidden_size;
        let mut hidden = vec![0.0; h];
        let mut cell = vec![0.0; h];
        let mut trace = Trace {
            inputs: Vec::with_capacity(seq.shape()[0]),
            steps: Vec::with_capacity(seq.shape()[0]),
        };
        for t in 0..seq.shape()[0] {
            let x = seq.row(t);
            let step = step_raw(
                &self.input_weights.value,
                &self.recurrent_weights.value,
                self.bias.value.data(),
                h,
                x,
                &hidden,
                &cell,
            );
            hidden.clone_from(&step.hidden);
            cell.clone_from(&step.cell);
            trace.inputs.push(x.to_vec());
            trace.steps.push(step);
        }
        Ok(trace)
    }

    pub fn infer(&self, seq: &Tensor) -> Result<Vec<f64>> {
        let mut trace = self.run(seq)?;
        Ok(trace.steps.pop().expect("non-empty").hidden)
    }

    pub fn forward(&mut self, seq: &Tensor) -> Result<Vec<f64>> {
        let trace = self.run(seq)?;
        let out = trace.steps.last().expect("non-empty").hidden.clone();
        self.trace = Some(Box::new(trace));
        Ok(out)
    }

    /// Backpropagation through time from `d loss / d h_T`.
    pub fn backward(&mut self, dh_last: &[f64]) -> Result<()> {
        let data = self.trace.as_ref().ok_or(NnError::BackwardBeforeForward)?;
        let h = self.hidden_size;
        expect_len(dh_last.len(), h, "lstm backward")?;
        let four_h = 4 * h;
        let steps = data.steps.len();

        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; h];
        // Pre-activation gradients per step; weight gradients are accumulated
        // once afterwards so each weight row is touched a single time.
        let mut dz_all = vec![vec![0.0; four_h]; steps];
        let zeros = vec![0.0; h];
        for t in (0..steps).rev() {
            let s = &data.steps[t];
            let c_prev = if t > 0 { &data.steps[t - 1].cell } else { &zeros };
            let dz = &mut dz_all[t];
            for j in 0..h {
                let d_out = dh[j] * s.cell_tanh[j];
                let dct = dc[j] + dh[j] * s.output[j] * (1.0 - s.cell_tanh[j] * s.cell_tanh[j]);
                let d_forget = dct * c_prev[j];
                let d_input = dct * s.candidate[j];
                let d_cand = dct * s.input[j];
                dc[j] = dct * s.forget[j];
                dz[j] = d_forget * s.forget[j] * (1.0 - s.forget[j]);
                dz[h + j] = d_input * s.input[j] * (1.0 - s.input[j]);
                dz[2 * h + j] = d_cand * (1.0 - s.candidate[j] * s.candidate[j]);
                dz[3 * h + j] = d_out * s.output[j] * (1.0 - s.output[j]);
            }
            if t > 0 {
                let w = &self.recurrent_weights.value;
                for (i, dhi) in dh.iter_mut().enumerate() {
                    *dhi = dot(w.row(i), dz);
                }
            }
        }

        for dz in &dz_all {
            axpy(&mut self.bias.grad, 1.0, dz);
        }
        for i in 0..self.input_size() {
            let row = &mut self.input_weights.grad[i * four_h..(i + 1) * four_h];
            for (t, dz) in dz_all.iter().enumerate() {
                let xi = data.inputs[t][i];
                if xi != 0.0 {
                    axpy(row, xi, dz);
                }
            }
        }
        for i in 0..h {
            let row = &mut self.recurrent_weights.grad[i * four_h..(i + 1) * four_h];
            for t in 1..steps {
                let hi = data.steps[t - 1].hidden[i];
                if hi != 0.0 {
                    axpy(row, hi, &dz_all[t]);
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.input_weights,
            &mut self.recurrent_weights,
            &mut self.bias,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_params_with_unit_cell_state() {
        let p = LstmCellParams::zeros(2, 1);
        let s = lstm_cell_step(&p, &[0.3, -0.7], &[0.0], &[1.0]).unwrap();
        // f = i = o = 0.5, g = 0
        assert_eq!(s.cell, vec![0.5]);
        assert_relative_eq!(s.hidden[0], 0.5 * 0.5f64.tanh(), epsilon = 1e-15);
        assert_relative_eq!(s.hidden[0], 0.2311, epsilon = 5e-5);
    }

    #[test]
    fn all_zero_gives_zero_state() {
        let p = LstmCellParams::zeros(3, 4);
        let s = lstm_cell_step(&p, &[0.0; 3], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(s.hidden, vec![0.0; 4]);
        assert_eq!(s.cell, vec![0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_preserves_cell() {
        let mut p = LstmCellParams::zeros(1, 2);
        p.gate_bias_mut(Gate::Forget).fill(50.0);
        p.gate_bias_mut(Gate::Input).fill(-50.0);
        let c_prev = [0.8, -1.3];
        let s = lstm_cell_step(&p, &[0.4], &[0.1, 0.2], &c_prev).unwrap();
        for j in 0..2 {
            assert!((s.cell[j] - c_prev[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_errors() {
        let p = LstmCellParams::zeros(2, 3);
        assert!(lstm_cell_step(&p, &[0.0], &[0.0; 3], &[0.0; 3]).is_err());
        assert!(lstm_cell_step(&p, &[0.0; 2], &[0.0; 2], &[0.0; 3]).is_err());
        let mut bad = p.clone();
        bad.recurrent_weights = Tensor::zeros(&[3, 3]);
        assert!(lstm_cell_step(&bad, &[0.0; 2], &[0.0; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn unrolled_layer_matches_repeated_cell_steps() {
        let mut init = Initializer::new(3);
        let mut layer = Lstm::new("l", 2, 3, &mut init);
        let seq = Tensor::from_rows(&[vec![0.1, 0.2], vec![-0.5, 0.3], vec![1.0, -1.0]]).unwrap();
        let out = layer.forward(&seq).unwrap();
        let p = layer.cell_params();
        let (mut h, mut c) = (vec![0.0; 3], vec![0.0; 3]);
        for t in 0..3 {
            let s = lstm_cell_step(&p, seq.row(t), &h, &c).unwrap();
            h = s.hidden;
            c = s.cell;
        }
        assert_eq!(out, h);
    }

    #[test]
    fn backward_requires_forward() {
        let mut init = Initializer::new(0);
        let mut layer = Lstm::new("l", 2, 3, &mut init);
        assert_eq!(layer.backward(&[0.0; 3]), Err(NnError::BackwardBeforeForward));
    }
}

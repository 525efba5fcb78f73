use missbeam_nn::gradcheck::relative_error;
use missbeam_nn::{
    grad_check, Conv1d, Dense, Differentiable, GradCheckConfig, Initializer, Lstm, Mlp, NnError,
    Param, Relu, Result, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(vec![rows, cols], random_vec(rng, rows * cols)).unwrap()
}

struct ConvStack {
    conv: Conv1d,
}

impl Differentiable for ConvStack {
    type Input = Tensor;

    fn forward(&mut self, input: &Tensor) -> Result<Vec<f64>> {
        Ok(self.conv.forward(input)?.into_data())
    }

    fn backward(&mut self, grad_output: &[f64]) -> Result<()> {
        let shape = [self.conv.out_channels(), grad_output.len() / self.conv.out_channels()];
        self.conv
            .backward(&Tensor::new(shape.to_vec(), grad_output.to_vec())?)?;
        Ok(())
    }

    fn params(&self) -> Vec<&Param> {
        self.conv.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.conv.params_mut()
    }
}

/// LSTM followed by a linear read-out, so the loss depends on every hidden unit.
struct LstmReadout {
    lstm: Lstm,
    head: Dense,
}

impl Differentiable for LstmReadout {
    type Input = Tensor;

    fn forward(&mut self, input: &Tensor) -> Result<Vec<f64>> {
        let h = self.lstm.forward(input)?;
        self.head.forward(&h)
    }

    fn backward(&mut self, grad_output: &[f64]) -> Result<()> {
        let dh = self.head.backward(grad_output)?;
        self.lstm.backward(&dh)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.lstm.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.lstm.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

fn config(seed: u64) -> GradCheckConfig {
    GradCheckConfig {
        seed,
        samples_per_param: 64,
        ..GradCheckConfig::default()
    }
}

#[test]
fn dense_two_layer_gradients() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut net = Mlp::new(&[5, 8, 3], seed);
        let x = random_vec(&mut rng, 5);
        let t = random_vec(&mut rng, 3);
        let r = grad_check(&mut net, &x, &t, &config(seed)).unwrap();
        assert!(r.max_relative_error < 1e-4, "seed {seed}: {r:?}");
        assert_eq!(r.checked, net.num_params());
    }
}

#[test]
fn conv1d_gradients() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let mut init = Initializer::new(seed);
        let mut net = ConvStack {
            conv: Conv1d::new("c", 3, 4, 3, 1, 1, &mut init).unwrap(),
        };
        let x = random_tensor(&mut rng, 3, 7);
        let t = random_vec(&mut rng, 4 * 7);
        let r = grad_check(&mut net, &x, &t, &config(seed)).unwrap();
        assert!(r.max_relative_error < 1e-4, "seed {seed}: {r:?}");
    }
}

#[test]
fn strided_conv1d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut init = Initializer::new(7);
    let mut net = ConvStack {
        conv: Conv1d::new("c", 2, 3, 2, 2, 1, &mut init).unwrap(),
    };
    let x = random_tensor(&mut rng, 2, 9);
    let t = random_vec(&mut rng, 3 * 5);
    let r = grad_check(&mut net, &x, &t, &config(7)).unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");
}

#[test]
fn lstm_single_step_and_three_step_gradients() {
    for (steps, seed) in [(1, 0), (1, 1), (3, 2), (3, 3), (3, 4)] {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let mut init = Initializer::new(seed);
        let mut net = LstmReadout {
            lstm: Lstm::new("l", 4, 6, &mut init),
            head: Dense::new("h", 6, 2, &mut init),
        };
        let x = random_tensor(&mut rng, steps, 4);
        let t = random_vec(&mut rng, 2);
        let r = grad_check(&mut net, &x, &t, &config(seed)).unwrap();
        assert!(r.max_relative_error < 1e-4, "steps {steps} seed {seed}: {r:?}");
    }
}

#[test]
fn unreachable_parameters_get_zero_gradient() {
    let mut init = Initializer::new(5);
    let mut used = Dense::new("used", 2, 1, &mut init);
    let unused = Dense::new("unused", 2, 1, &mut init);
    let y = used.forward(&[1.0, 2.0]).unwrap();
    used.backward(&missbeam_nn::mse_grad(&y, &[0.0]).unwrap()).unwrap();
    assert!(used.weight.grad.iter().any(|g| *g != 0.0));
    assert!(unused.weight.grad.iter().all(|g| *g == 0.0));
    assert!(unused.bias.grad.iter().all(|g| *g == 0.0));
}

#[test]
fn layers_refuse_backward_without_forward() {
    let mut init = Initializer::new(1);
    let mut conv = Conv1d::new("c", 1, 1, 2, 1, 0, &mut init).unwrap();
    assert_eq!(
        conv.backward(&Tensor::zeros(&[1, 3])).unwrap_err(),
        NnError::BackwardBeforeForward
    );
    let mut mlp = Mlp::new(&[2, 2], 0);
    assert_eq!(mlp.backward(&[0.0, 0.0]), Err(NnError::BackwardBeforeForward));
    assert!(Relu::new().backward(&[1.0]).is_err());
}

#[test]
fn relative_error_floor() {
    assert_eq!(relative_error(0.0, 0.0, 1e-6), 0.0);
    assert!((relative_error(1.0, 1.0001, 1e-6) - 1e-4 / 1.0001).abs() < 1e-12);
    assert!(relative_error(1e-12, 0.0, 1e-6) < 1e-5);
}

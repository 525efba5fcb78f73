use missbeam_nn::{mse_grad, mse_loss, Adam, AdamConfig, Differentiable, Normalization};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{encode_target, encode_window, raw_rows, ModelSpec, NetInput, TrainedModel, UntrainedModel};
use crate::dataset::SampleWindow;
use crate::error::{Error, Result};

/// Channels whose training standard deviation falls below this are scaled
/// by one instead.
pub const NORMALIZATION_STD_FLOOR: f64 = 1e-9;

/// Per-channel mean and standard deviation over the past epochs of the
/// training windows, or identity statistics when normalization is off.
pub fn fit_normalization(spec: &ModelSpec, windows: &[SampleWindow]) -> Result<Normalization> {
    let names = spec.channel_names();
    if !spec.normalize {
        return Ok(Normalization::identity(names));
    }
    let c = names.len();
    let mut sum = vec![0.0; c];
    let mut sum_sq = vec![0.0; c];
    let mut count = 0usize;
    for w in windows {
        for row in raw_rows(spec.extras, w)? {
            for (k, v) in row.iter().enumerate() {
                sum[k] += v;
                sum_sq[k] += v * v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidSpec("no training epochs to normalize".into()));
    }
    let n = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| {
            let var = (sq / n - m * m).max(0.0);
            let s = var.sqrt();
            if s < NORMALIZATION_STD_FLOOR || !s.is_finite() {
                1.0
            } else {
                s
            }
        })
        .collect();
    Ok(Normalization {
        channels: names,
        mean,
        std,
    })
}

/// Trains with Adam on MSE for `spec.epochs`, shuffling windows each epoch.
pub fn train(model: UntrainedModel, windows: &[SampleWindow]) -> Result<TrainedModel> {
    train_with_progress(model, windows, &mut |_, _| {})
}

/// As [`train`], reporting `(epoch, mean loss)` after every epoch.
pub fn train_with_progress(
    model: UntrainedModel,
    windows: &[SampleWindow],
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainedModel> {
    let UntrainedModel {
        spec,
        seed,
        mut network,
    } = model;
    spec.validate()?;
    if windows.is_empty() {
        return Err(Error::InvalidSpec("no training windows".into()));
    }
    let normalization = fit_normalization(&spec, windows)?;
    let samples: Vec<(NetInput, Vec<f64>)> = windows
        .iter()
        .map(|w| Ok((encode_window(&spec, &normalization, w)?, encode_target(&spec, &normalization, w))))
        .collect::<Result<_>>()?;

    let mut adam = Adam::new(AdamConfig::with_learning_rate(spec.learning_rate))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_history = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(spec.batch_size) {
            network.zero_grad();
            for &i in batch {
                let (input, target) = &samples[i];
                let out = network.forward(input)?;
                let loss = mse_loss(&out, target)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, loss });
                }
                total += loss;
                network.backward(&mse_grad(&out, target)?)?;
            }
            let scale = 1.0 / batch.len() as f64;
            let mut params = network.params_mut();
            if batch.len() > 1 {
                for p in params.iter_mut() {
                    p.scale_grad(scale);
                }
            }
            adam.step(&mut params).map_err(|e| match e {
                missbeam_nn::NnError::NonFiniteGradient(_) => Error::Diverged {
                    epoch,
                    loss: f64::NAN,
                },
                other => other.into(),
            })?;
        }
        let mean = total / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        loss_history.push(mean);
        progress(epoch, mean);
    }
    Ok(TrainedModel {
        spec,
        seed,
        normalization,
        loss_history,
        network,
    })
}

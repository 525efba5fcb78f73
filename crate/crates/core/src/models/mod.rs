//! Learned missing-beam regressors: one network per missing-beam set.

mod network;
mod train;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use missbeam_nn::{Differentiable, Normalization, Tensor, WeightFile};
use serde::{Deserialize, Serialize};

use crate::beams::{BeamSet, BeamVector, Velocity3, NUM_BEAMS};
use crate::dataset::{ExtraInputs, SampleWindow};
use crate::error::{Error, Result};
use crate::geometry::BeamGeometry;

pub use network::{NetInput, Network};
pub use train::{fit_normalization, train, train_with_progress, NORMALIZATION_STD_FLOOR};

pub const MODEL_FORMAT: &str = "missbeam-model/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    LstmMultihead,
    CnnMultihead,
    LstmSinglehead,
    CnnSinglehead,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::LstmMultihead,
        Architecture::CnnMultihead,
        Architecture::LstmSinglehead,
        Architecture::CnnSinglehead,
    ];

    pub fn is_multihead(self) -> bool {
        matches!(self, Architecture::LstmMultihead | Architecture::CnnMultihead)
    }

    pub fn is_lstm(self) -> bool {
        matches!(self, Architecture::LstmMultihead | Architecture::LstmSinglehead)
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::LstmMultihead => "lstm_multihead",
            Architecture::CnnMultihead => "cnn_multihead",
            Architecture::LstmSinglehead => "lstm_singlehead",
            Architecture::CnnSinglehead => "cnn_singlehead",
        }
    }

    /// Short label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Architecture::LstmMultihead => "LSTM",
            Architecture::CnnMultihead => "CNN",
            Architecture::LstmSinglehead => "LSTM A",
            Architecture::CnnSinglehead => "CNN A",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown architecture `{s}`")))
    }
}

/// Everything that determines a network's shape and its training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub missing: BeamSet,
    pub window_size: usize,
    #[serde(default)]
    pub extras: ExtraInputs,
    pub hidden_size: usize,
    pub lstm_output_size: usize,
    /// Hidden fully connected widths; the output layer of width `|missing|`
    /// is appended.
    pub fc_layer_sizes: Vec<usize>,
    #[serde(default = "default_conv_channels")]
    pub conv_channels: [usize; 2],
    #[serde(default = "default_conv_kernel")]
    pub conv_kernel: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_conv_channels() -> [usize; 2] {
    [16, 32]
}
fn default_conv_kernel() -> usize {
    3
}
fn default_true() -> bool {
    true
}

impl ModelSpec {
    /// Window 6, hidden 500, LSTM output 7, one hidden FC layer of 64,
    /// learning rate 5e-5, batch 1, 150 epochs.
    pub fn new(architecture: Architecture, missing: BeamSet) -> Self {
        Self {
            architecture,
            missing,
            window_size: 6,
            extras: ExtraInputs::default(),
            hidden_size: 500,
            lstm_output_size: 7,
            fc_layer_sizes: vec![64],
            conv_channels: default_conv_channels(),
            conv_kernel: default_conv_kernel(),
            learning_rate: 5e-5,
            epochs: 150,
            batch_size: 1,
            normalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.missing.is_empty() || self.missing.is_full() {
            return bad(format!("missing set {} must hold 1 to 3 beams", self.missing));
        }
        if self.window_size == 0 {
            return bad("window size must be at least 1".into());
        }
        if self.architecture.is_lstm() && (self.hidden_size == 0 || self.lstm_output_size == 0) {
            return bad("LSTM hidden and output sizes must be positive".into());
        }
        if !self.architecture.is_lstm() {
            if self.conv_channels.contains(&0) || self.conv_kernel == 0 {
                return bad("convolution channels and kernel must be positive".into());
            }
            if self.conv_kernel > self.window_size + 2 * self.conv_padding() {
                return bad(format!(
                    "kernel {} does not fit a window of {}",
                    self.conv_kernel, self.window_size
                ));
            }
        }
        if self.fc_layer_sizes.contains(&0) {
            return bad("fully connected widths must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        Ok(())
    }

    /// Unit padding, matching the unit stride.
    pub fn conv_padding(&self) -> usize {
        1
    }

    pub fn available(&self) -> BeamSet {
        self.missing.complement()
    }

    /// Number of currently available beams fed to head 2.
    pub fn available_width(&self) -> usize {
        NUM_BEAMS - self.missing.len()
    }

    pub fn channel_names(&self) -> Vec<String> {
        channel_names(self.extras)
    }
}

/// Channel names of head-1 inputs: beams, then depth, then velocity.
pub fn channel_names(extras: ExtraInputs) -> Vec<String> {
    let mut names: Vec<String> = (1..=NUM_BEAMS).map(|b| format!("b{b}")).collect();
    if extras.depth {
        names.push("depth_m".into());
    }
    if extras.velocity {
        names.extend(["vx", "vy", "vz"].map(String::from));
    }
    names
}

/// A freshly initialized network with its spec and seed.
#[derive(Debug, Clone)]
pub struct UntrainedModel {
    pub spec: ModelSpec,
    pub seed: u64,
    pub network: Network,
}

pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<UntrainedModel> {
    Ok(UntrainedModel {
        spec: spec.clone(),
        seed,
        network: Network::new(spec, seed)?,
    })
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub seed: u64,
    pub normalization: Normalization,
    /// Mean normalized MSE per epoch.
    pub loss_history: Vec<f64>,
    pub network: Network,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    spec: ModelSpec,
    loss_history: Vec<f64>,
    weights: WeightFile,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            spec: self.spec.clone(),
            loss_history: self.loss_history.clone(),
            weights: WeightFile::capture(self.network.params(), self.seed, Some(self.normalization.clone())),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::InvalidSpec(format!(
                "unsupported model format `{}`",
                doc.format
            )));
        }
        let mut network = Network::new(&doc.spec, doc.weights.seed)?;
        doc.weights.restore(network.params_mut())?;
        let normalization = doc
            .weights
            .normalization
            .clone()
            .ok_or_else(|| Error::InvalidSpec("model document lacks normalization".into()))?;
        if normalization.channels != doc.spec.channel_names() {
            return Err(Error::InvalidSpec(format!(
                "normalization channels {:?} do not match the model spec",
                normalization.channels
            )));
        }
        Ok(Self {
            spec: doc.spec,
            seed: doc.weights.seed,
            normalization,
            loss_history: doc.loss_history,
            network,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Normalized network input for a window that matches this model.
    pub fn encode(&self, window: &SampleWindow) -> Result<NetInput> {
        encode_window(&self.spec, &self.normalization, window)
    }

    /// Predicted values of the missing beams, in m/s.
    pub fn regress_missing(&self, window: &SampleWindow) -> Result<BeamVector> {
        let input = self.encode(window)?;
        let out = self.network.infer(&input)?;
        let values: Vec<f64> = self
            .spec
            .missing
            .iter()
            .zip(&out)
            .map(|(b, &y)| self.normalization.denormalize(b - 1, y))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regressed beams"));
        }
        BeamVector::from_ordered(self.spec.missing, &values)
    }

    /// Completes the beam set with regressed beams and solves for velocity.
    pub fn complete_and_estimate(&self, geom: &BeamGeometry, window: &SampleWindow) -> Result<Velocity3> {
        let regressed = self.regress_missing(window)?;
        complete_and_estimate_with(geom, window, &regressed)
    }
}

/// Least-squares velocity over the available beams merged with `filled`.
pub fn complete_and_estimate_with(
    geom: &BeamGeometry,
    window: &SampleWindow,
    filled: &BeamVector,
) -> Result<Velocity3> {
    let full = window.current_available.merge(filled)?;
    if !full.present().is_full() {
        return Err(Error::WindowMismatch(format!(
            "completed beam set {} is not full",
            full.present()
        )));
    }
    geom.ls_velocity(&full)
}

/// Window adapted to `spec`: longer windows are cut to their most recent
/// epochs, and the missing set must match exactly.
fn fit_window<'a>(spec: &ModelSpec, window: &'a SampleWindow) -> Result<std::borrow::Cow<'a, SampleWindow>> {
    if window.missing != spec.missing || window.current_available.present() != spec.available() {
        return Err(Error::WindowMismatch(format!(
            "window masks {} but the model regresses {}",
            window.missing, spec.missing
        )));
    }
    match window.window_size().cmp(&spec.window_size) {
        std::cmp::Ordering::Equal => Ok(std::borrow::Cow::Borrowed(window)),
        std::cmp::Ordering::Greater => Ok(std::borrow::Cow::Owned(window.tail(spec.window_size)?)),
        std::cmp::Ordering::Less => Err(Error::WindowMismatch(format!(
            "window holds {} past epochs, the model needs {}",
            window.window_size(),
            spec.window_size
        ))),
    }
}

/// Raw (unnormalized) head-1 rows of a window.
pub(crate) fn raw_rows(extras: ExtraInputs, window: &SampleWindow) -> Result<Vec<Vec<f64>>> {
    window
        .past
        .iter()
        .zip(&window.past_velocity)
        .map(|(s, v)| {
            let mut row = s.beams.to_vec();
            if extras.depth {
                row.push(s.depth_m.ok_or_else(|| {
                    Error::WindowMismatch(format!("epoch at t = {} s has no depth", s.time_s))
                })?);
            }
            if extras.velocity {
                row.extend(v.to_array());
            }
            Ok(row)
        })
        .collect()
}

pub(crate) fn encode_window(spec: &ModelSpec, norm: &Normalization, window: &SampleWindow) -> Result<NetInput> {
    let window = fit_window(spec, window)?;
    let mut rows = raw_rows(spec.extras, &window)?;
    for row in rows.iter_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = norm.normalize(c, *v);
        }
    }
    let available = spec
        .available()
        .iter()
        .map(|b| norm.normalize(b - 1, window.current_available.get(b).expect("mask checked")))
        .collect();
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    let sequence = Tensor::new(vec![spec.window_size, spec.extras.channels()], data)?;
    if !sequence.all_finite() {
        return Err(Error::NonFinite("network input"));
    }
    Ok(NetInput { sequence, available })
}

/// Normalized targets of a window.
pub(crate) fn encode_target(spec: &ModelSpec, norm: &Normalization, window: &SampleWindow) -> Vec<f64> {
    spec.missing
        .iter()
        .zip(&window.target)
        .map(|(b, &y)| norm.normalize(b - 1, y))
        .collect()
}

/// Anything that fills a fixed missing-beam set from a window.
pub trait BeamRegressor {
    fn missing(&self) -> BeamSet;
    /// Past epochs needed.
    fn window_size(&self) -> usize;
    fn regress(&self, window: &SampleWindow) -> Result<BeamVector>;
}

impl BeamRegressor for TrainedModel {
    fn missing(&self) -> BeamSet {
        self.spec.missing
    }

    fn window_size(&self) -> usize {
        self.spec.window_size
    }

    fn regress(&self, window: &SampleWindow) -> Result<BeamVector> {
        self.regress_missing(window)
    }
}

/// File name under which the model for `missing` is stored.
pub fn model_file_name(missing: BeamSet) -> String {
    format!("model_{}.json", missing.tag())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::enumerate_combinations;

    fn small(arch: Architecture, missing: &str) -> ModelSpec {
        let mut s = ModelSpec::new(arch, missing.parse().unwrap());
        s.hidden_size = 8;
        s
    }

    #[test]
    fn default_spec_values() {
        let s = ModelSpec::new(Architecture::LstmMultihead, BeamSet::single(1).unwrap());
        assert_eq!(s.window_size, 6);
        assert_eq!(s.hidden_size, 500);
        assert_eq!(s.lstm_output_size, 7);
        assert_eq!(s.learning_rate, 5e-5);
        assert_eq!(s.batch_size, 1);
        assert_eq!(s.epochs, 150);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn two_missing_dimensions() {
        let m = build_model(&small(Architecture::LstmMultihead, "1,2"), 0).unwrap();
        assert_eq!(m.network.sequence_shape(), [6, 4]);
        assert_eq!(m.network.available_width(), 2);
        assert_eq!(m.network.output_width(), 2);
    }

    #[test]
    fn three_missing_and_extras() {
        let m = build_model(&small(Architecture::CnnMultihead, "1,2,3"), 0).unwrap();
        assert_eq!(m.network.available_width(), 1);
        assert_eq!(m.network.output_width(), 3);
        assert_eq!(m.network.head_width(), 32 * 6);

        let mut s = small(Architecture::LstmMultihead, "1");
        s.extras = ExtraInputs {
            depth: true,
            velocity: true,
        };
        let m = build_model(&s, 0).unwrap();
        assert_eq!(m.network.sequence_shape(), [6, 8]);
        assert_eq!(s.channel_names().len(), 8);
    }

    #[test]
    fn every_combination_builds() {
        for arch in Architecture::ALL {
            for missing in enumerate_combinations() {
                let mut s = small(arch, "1");
                s.missing = missing;
                let m = build_model(&s, 1).unwrap();
                let expected = if arch.is_multihead() { 4 - missing.len() } else { 0 };
                assert_eq!(m.network.available_width(), expected);
                assert_eq!(m.network.output_width(), missing.len());
            }
        }
    }

    #[test]
    fn inconsistent_specs_are_rejected() {
        let mut s = small(Architecture::LstmMultihead, "1");
        s.missing = BeamSet::ALL;
        assert!(build_model(&s, 0).is_err());
        s.missing = BeamSet::EMPTY;
        assert!(build_model(&s, 0).is_err());
        let mut s = small(Architecture::LstmMultihead, "1");
        s.window_size = 0;
        assert!(build_model(&s, 0).is_err());
        let mut s = small(Architecture::LstmMultihead, "1");
        s.learning_rate = 0.0;
        assert!(build_model(&s, 0).is_err());
        let mut s = small(Architecture::CnnMultihead, "1");
        s.window_size = 1;
        s.conv_kernel = 5;
        assert!(build_model(&s, 0).is_err());
    }

    #[test]
    fn architecture_names_round_trip() {
        for a in Architecture::ALL {
            assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
        }
        assert!("mlp".parse::<Architecture>().is_err());
        assert_eq!(model_file_name("1,2".parse().unwrap()), "model_1-2.json");
    }
}

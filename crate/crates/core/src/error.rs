use thiserror::Error;

use crate::beams::BeamSet;

#[derive(Debug, Error)]
pub enum Error {
    #[error("beam index {0} out of range (expected 1..=4)")]
    BeamIndex(usize),
    #[error("empty beam set")]
    EmptyBeamSet,
    #[error("invalid pitch angle {0} rad (expected 0 < pitch < pi/2)")]
    InvalidPitch(f64),
    #[error("velocity unobservable from beams {0}: at least 3 beams are required")]
    Unobservable(BeamSet),
    #[error("direction matrix is numerically singular (condition number {0:.3e})")]
    Singular(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("insufficient history: need {needed} valid samples for beam {beam}, have {available}")]
    InsufficientHistory {
        beam: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0}")]
    InvalidSpec(String),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
    #[error("split: {0}")]
    Split(String),
    #[error("mission `{id}` has {len} samples, window size {window} needs at least {}", window + 1)]
    MissionTooShort { id: String, len: usize, window: usize },
    #[error("window does not match model: {0}")]
    WindowMismatch(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("no model available for combination {0}")]
    MissingModel(BeamSet),
    #[error("{0}")]
    Evaluation(String),
    #[error(transparent)]
    Nn(#[from] missbeam_nn::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! DVL beam geometry, missing-beam fillers, datasets, simulation, learned
//! regressors and their evaluation.

pub mod beams;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod fillers;
pub mod geometry;
pub mod models;
pub mod pressure;
pub mod sample;
pub mod sim;

pub use beams::{enumerate_combinations, BeamSet, BeamVector, Velocity3, NUM_BEAMS};
pub use error::{Error, Result};
pub use geometry::BeamGeometry;
pub use sample::BeamSample;

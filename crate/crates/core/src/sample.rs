use serde::{Deserialize, Serialize};

use crate::beams::{BeamSet, BeamVector, Velocity3, NUM_BEAMS};

/// One DVL epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSample {
    pub time_s: f64,
    /// Beam-axis velocities, m/s. Entries for invalid beams carry no meaning.
    pub beams: [f64; NUM_BEAMS],
    pub valid: BeamSet,
    pub depth_m: Option<f64>,
    /// Reference velocity recorded alongside the beams, if any.
    pub velocity: Option<Velocity3>,
}

impl BeamSample {
    pub fn complete(time_s: f64, beams: [f64; NUM_BEAMS]) -> Self {
        Self {
            time_s,
            beams,
            valid: BeamSet::ALL,
            depth_m: None,
            velocity: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.valid.is_full() && self.beams.iter().all(|b| b.is_finite())
    }

    /// The valid beams as a beam vector.
    pub fn beam_vector(&self) -> BeamVector {
        BeamVector::new(self.valid, self.beams)
    }
}

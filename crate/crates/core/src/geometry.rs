//! Janus beam geometry, the forward beam model and least-squares velocity
//! recovery from any observable subset of beams.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::beams::{BeamSet, BeamVector, Velocity3, NUM_BEAMS};
use crate::error::{Error, Result};

/// Default transducer pitch from vertical, degrees.
pub const DEFAULT_PITCH_DEG: f64 = 20.0;

/// Largest accepted condition number of `AᵀA` before the solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Unit vector of a beam with the given pitch (from vertical) and yaw:
/// `[cos ψ sin θ, sin ψ sin θ, cos θ]`.
pub fn unit_direction(pitch: f64, yaw: f64) -> Vector3<f64> {
    Vector3::new(yaw.cos() * pitch.sin(), yaw.sin() * pitch.sin(), pitch.cos())
}

/// Transducer configuration: one pitch angle shared by all beams and a yaw
/// per beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGeometry {
    pitch: f64,
    yaw: [f64; NUM_BEAMS],
    directions: [Vector3<f64>; NUM_BEAMS],
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self::janus_degrees(DEFAULT_PITCH_DEG).expect("default pitch is valid")
    }
}

impl BeamGeometry {
    /// Standard Janus "X" layout: beam `i` at yaw `(i-1)·90° + 45°`.
    pub fn janus(pitch: f64) -> Result<Self> {
        let yaw = std::array::from_fn(|k| (k as f64 * 90.0 + 45.0).to_radians());
        Self::new(pitch, yaw)
    }

    pub fn janus_degrees(pitch_deg: f64) -> Result<Self> {
        Self::janus(pitch_deg.to_radians())
    }

    pub fn new(pitch: f64, yaw: [f64; NUM_BEAMS]) -> Result<Self> {
        if !(pitch > 0.0 && pitch < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidPitch(pitch));
        }
        if yaw.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("beam yaw angles"));
        }
        let directions = std::array::from_fn(|k| unit_direction(pitch, yaw[k]));
        Ok(Self {
            pitch,
            yaw,
            directions,
        })
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn pitch_degrees(&self) -> f64 {
        self.pitch.to_degrees()
    }

    pub fn yaw(&self) -> [f64; NUM_BEAMS] {
        self.yaw
    }

    /// Unit direction of beam `beam` (1..=4).
    pub fn beam_direction(&self, beam: usize) -> Result<Vector3<f64>> {
        if !(1..=NUM_BEAMS).contains(&beam) {
            return Err(Error::BeamIndex(beam));
        }
        Ok(self.directions[beam - 1])
    }

    /// `|present| x 3` matrix whose rows are the present beam directions in
    /// ascending beam order.
    pub fn direction_matrix(&self, present: BeamSet) -> Result<DMatrix<f64>> {
        if present.is_empty() {
            return Err(Error::EmptyBeamSet);
        }
        let beams = present.to_vec();
        Ok(DMatrix::from_fn(beams.len(), 3, |r, c| {
            self.directions[beams[r] - 1][c]
        }))
    }

    /// Beam-axis projections `b_iᵀ v` for each present beam.
    pub fn forward_beams(&self, v: Velocity3, present: BeamSet) -> BeamVector {
        let vv = v.to_vector();
        let values = std::array::from_fn(|k| {
            if present.contains(k + 1) {
                self.directions[k].dot(&vv)
            } else {
                0.0
            }
        });
        BeamVector::new(present, values)
    }

    /// Least-squares velocity `(AᵀA)⁻¹Aᵀy` over the present beams. Three
    /// beams are solved exactly.
    pub fn ls_velocity(&self, y: &BeamVector) -> Result<Velocity3> {
        let present = y.present();
        if present.len() < 3 {
            return Err(Error::Unobservable(present));
        }
        if y.ordered().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("beam measurements"));
        }
        let beams: Vec<usize> = present.to_vec();
        let mut normal = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for &b in &beams {
            let d = self.directions[b - 1];
            normal += d * d.transpose();
            rhs += d * y.get(b).expect("present");
        }
        let condition = condition_number(&normal);
        if condition > MAX_CONDITION {
            return Err(Error::Singular(condition));
        }
        let solution = if beams.len() == 3 {
            let a = Matrix3::from_rows(&[
                self.directions[beams[0] - 1].transpose(),
                self.directions[beams[1] - 1].transpose(),
                self.directions[beams[2] - 1].transpose(),
            ]);
            let rhs3 = Vector3::from_iterator(beams.iter().map(|&b| y.get(b).expect("present")));
            a.lu().solve(&rhs3)
        } else {
            normal.cholesky().map(|c| c.solve(&rhs))
        };
        solution
            .map(|v| Velocity3::from_vector(&v))
            .ok_or(Error::Singular(condition))
    }
}

/// Condition number of a symmetric positive semi-definite 3x3 matrix.
fn condition_number(m: &Matrix3<f64>) -> f64 {
    let eig = m.symmetric_eigenvalues();
    let max = eig.iter().fold(f64::MIN, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::MAX, |a, &b| a.min(b.abs()));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

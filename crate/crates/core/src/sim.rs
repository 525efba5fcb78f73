//! Synthetic trajectories with DVL beam and pressure measurements.
//!
//! Doppler quantities follow the instrument relation
//! `v = (F_D + b + n) · 1000 · C · (1 + SF) / (2 f_s)`, with `f_s` in Hz,
//! `C` in m/s and the shift, bias and noise in kHz.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::beams::{BeamSet, BeamVector, Velocity3, NUM_BEAMS};
use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::geometry::{BeamGeometry, DEFAULT_PITCH_DEG};
use crate::pressure::{depth_from_pressure, pressure_kpa, SEAWATER_DENSITY};
use crate::sample::BeamSample;

pub const DEFAULT_SOUND_SPEED: f64 = 1500.0;
pub const DEFAULT_TRANSMIT_HZ: f64 = 600_000.0;
pub const DEFAULT_BEAM_NOISE_MPS: f64 = 0.01;
pub const DEFAULT_MAX_SPEED: f64 = 3.0;
/// Shortest accepted run: the default window plus two epochs.
pub const MIN_DURATION_S: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerModel {
    /// Doppler-shift bias, kHz.
    pub bias: f64,
    /// Doppler-shift noise standard deviation, kHz.
    pub noise_std: f64,
    pub scale_factor: f64,
    pub sound_speed: f64,
    pub transmit_hz: f64,
}

impl Default for DopplerModel {
    fn default() -> Self {
        let mut m = Self::ideal();
        m.noise_std = m.shift_for_velocity(DEFAULT_BEAM_NOISE_MPS);
        m
    }
}

impl DopplerModel {
    /// Default instrument without bias, noise or scale-factor error.
    pub fn ideal() -> Self {
        Self {
            bias: 0.0,
            noise_std: 0.0,
            scale_factor: 0.0,
            sound_speed: DEFAULT_SOUND_SPEED,
            transmit_hz: DEFAULT_TRANSMIT_HZ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.transmit_hz > 0.0
            && self.sound_speed > 0.0
            && self.noise_std >= 0.0
            && self.bias.is_finite()
            && self.scale_factor.is_finite()
            && self.scale_factor > -1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid Doppler model {self:?}")))
        }
    }

    /// Doppler shift (kHz) of a beam velocity under an ideal instrument.
    pub fn shift_for_velocity(&self, beam_velocity: f64) -> f64 {
        2.0 * self.transmit_hz * beam_velocity / (1000.0 * self.sound_speed)
    }

    /// Velocity reported for a measured shift (kHz).
    pub fn velocity_for_shift(&self, shift: f64) -> f64 {
        shift * 1000.0 * self.sound_speed * (1.0 + self.scale_factor) / (2.0 * self.transmit_hz)
    }

    /// Beam-velocity noise standard deviation implied by `noise_std`.
    pub fn velocity_noise_std(&self) -> f64 {
        self.velocity_for_shift(self.noise_std).abs()
    }
}

/// Four noisy beam measurements of the velocity `v`.
pub fn measure_beams<R: Rng + ?Sized>(
    geom: &BeamGeometry,
    dm: &DopplerModel,
    v: Velocity3,
    rng: &mut R,
) -> BeamVector {
    let truth = geom.forward_beams(v, BeamSet::ALL).raw();
    let values = std::array::from_fn(|k| {
        let noise = if dm.noise_std > 0.0 {
            dm.noise_std * rng.sample::<f64, _>(rand_distr::StandardNormal)
        } else {
            0.0
        };
        dm.velocity_for_shift(dm.shift_for_velocity(truth[k]) + dm.bias + noise)
    });
    BeamVector::full(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMeasurement {
    pub pressure_kpa: f64,
    pub depth_m: f64,
}

/// Pressure at `depth_m` with optional Gaussian noise (kPa) and the depth
/// recovered from it.
pub fn measure_depth<R: Rng + ?Sized>(
    depth_m: f64,
    density: f64,
    noise_std_kpa: f64,
    rng: &mut R,
) -> Result<DepthMeasurement> {
    if !(depth_m >= 0.0) {
        return Err(Error::InvalidSpec(format!("negative depth {depth_m}")));
    }
    if !(density > 0.0) || !(noise_std_kpa >= 0.0) {
        return Err(Error::InvalidSpec("density must be positive and noise non-negative".into()));
    }
    let mut p = pressure_kpa(depth_m, density);
    if noise_std_kpa > 0.0 {
        p += noise_std_kpa * rng.sample::<f64, _>(rand_distr::StandardNormal);
    }
    Ok(DepthMeasurement {
        pressure_kpa: p,
        depth_m: depth_from_pressure(p, density),
    })
}

/// Platform-frame velocity pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionProfile {
    Constant {
        velocity: [f64; 3],
    },
    /// `mean + amplitude · sin(2π t / period)` per axis.
    Sinusoidal {
        mean: [f64; 3],
        amplitude: [f64; 3],
        period_s: [f64; 3],
    },
    /// Straight legs at `speed` joined by turns during which forward speed
    /// eases to `turn_speed` and the vehicle sways sideways, alternating
    /// direction every turn.
    Lawnmower {
        speed: f64,
        leg_s: f64,
        turn_s: f64,
        turn_speed: f64,
        sway: f64,
        #[serde(default)]
        heave: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DepthProfile {
    Constant { depth_m: f64 },
    /// Integrates the vertical velocity (positive down) from an initial
    /// depth, stopping at the surface.
    FollowVelocity { initial_m: f64 },
}

/// First-order Gauss-Markov velocity perturbation with the given stationary
/// standard deviation and correlation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub std: f64,
    pub correlation_s: f64,
}

/// Beams flagged invalid for `start_s <= t < end_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dropout {
    pub start_s: f64,
    pub end_s: f64,
    pub beams: BeamSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    /// Number of 1 Hz epochs.
    pub duration_s: usize,
    pub motion: MotionProfile,
    pub depth: DepthProfile,
    #[serde(default)]
    pub disturbance: Option<Disturbance>,
    #[serde(default)]
    pub dropouts: Vec<Dropout>,
    #[serde(default = "default_max_speed")]
    pub max_speed: f64,
    pub seed: u64,
}

fn default_max_speed() -> f64 {
    DEFAULT_MAX_SPEED
}

impl TrajectorySpec {
    pub fn constant(velocity: Velocity3, duration_s: usize, seed: u64) -> Self {
        Self {
            duration_s,
            motion: MotionProfile::Constant {
                velocity: velocity.to_array(),
            },
            depth: DepthProfile::Constant { depth_m: 20.0 },
            disturbance: None,
            dropouts: Vec::new(),
            max_speed: DEFAULT_MAX_SPEED,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.duration_s < MIN_DURATION_S {
            return bad(format!(
                "duration {} s is shorter than the minimum {MIN_DURATION_S} s",
                self.duration_s
            ));
        }
        if !(self.max_speed > 0.0) {
            return bad("max speed must be positive".into());
        }
        match &self.motion {
            MotionProfile::Constant { velocity } => {
                if velocity.iter().any(|v| !v.is_finite()) {
                    return bad("non-finite constant velocity".into());
                }
            }
            MotionProfile::Sinusoidal {
                mean,
                amplitude,
                period_s,
            } => {
                for k in 0..3 {
                    if !mean[k].is_finite() || !amplitude[k].is_finite() {
                        return bad("non-finite sinusoid parameters".into());
                    }
                    if amplitude[k] != 0.0 && !(period_s[k] > 0.0) {
                        return bad(format!("sinusoid period on axis {k} must be positive"));
                    }
                }
            }
            MotionProfile::Lawnmower {
                speed,
                leg_s,
                turn_s,
                turn_speed,
                sway,
                heave,
            } => {
                if !(*leg_s > 0.0) || !(*turn_s > 0.0) {
                    return bad("lawnmower leg and turn durations must be positive".into());
                }
                if [speed, turn_speed, sway, heave].iter().any(|v| !v.is_finite()) {
                    return bad("non-finite lawnmower parameters".into());
                }
            }
        }
        match self.depth {
            DepthProfile::Constant { depth_m } | DepthProfile::FollowVelocity { initial_m: depth_m } => {
                if !(depth_m >= 0.0) {
                    return bad(format!("depth {depth_m} must be non-negative"));
                }
            }
        }
        if let Some(d) = self.disturbance {
            if !(d.std >= 0.0) || !(d.correlation_s > 0.0) {
                return bad("disturbance needs std >= 0 and correlation > 0".into());
            }
        }
        for d in &self.dropouts {
            if !(d.end_s > d.start_s) || d.beams.is_empty() {
                return bad(format!("invalid dropout {d:?}"));
            }
        }
        Ok(())
    }

    fn profile_velocity(&self, t: f64) -> [f64; 3] {
        use std::f64::consts::PI;
        match &self.motion {
            MotionProfile::Constant { velocity } => *velocity,
            MotionProfile::Sinusoidal {
                mean,
                amplitude,
                period_s,
            } => std::array::from_fn(|k| {
                if amplitude[k] == 0.0 {
                    mean[k]
                } else {
                    mean[k] + amplitude[k] * (2.0 * PI * t / period_s[k]).sin()
                }
            }),
            MotionProfile::Lawnmower {
                speed,
                leg_s,
                turn_s,
                turn_speed,
                sway,
                heave,
            } => {
                let cycle = leg_s + turn_s;
                let turn_index = (t / cycle).floor();
                let phase = t - turn_index * cycle;
                let side = if turn_index as i64 % 2 == 0 { 1.0 } else { -1.0 };
                let heave_v = heave * (2.0 * PI * t / cycle).sin();
                if phase < *leg_s {
                    [*speed, 0.0, heave_v]
                } else {
                    let s = (PI * (phase - leg_s) / turn_s).sin();
                    [speed + (turn_speed - speed) * s, side * sway * s, heave_v]
                }
            }
        }
    }
}

/// Ground truth sampled at 1 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub time_s: Vec<f64>,
    pub velocity: Vec<Velocity3>,
    pub depth_m: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }
}

pub fn simulate_trajectory(spec: &TrajectorySpec) -> Result<Trajectory> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.duration_s;
    let mut disturbance = [0.0; 3];
    let mut time_s = Vec::with_capacity(n);
    let mut velocity = Vec::with_capacity(n);
    let mut depth_m = Vec::with_capacity(n);
    let (phi, drive) = match spec.disturbance {
        Some(d) => {
            let phi = (-1.0 / d.correlation_s).exp();
            let normal = Normal::new(0.0, d.std * (1.0 - phi * phi).sqrt())
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            for x in disturbance.iter_mut() {
                *x = d.std * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            (phi, Some(normal))
        }
        None => (0.0, None),
    };
    let mut depth = match spec.depth {
        DepthProfile::Constant { depth_m } => depth_m,
        DepthProfile::FollowVelocity { initial_m } => initial_m,
    };
    for k in 0..n {
        let t = k as f64;
        if k > 0 {
            if let Some(normal) = &drive {
                for x in disturbance.iter_mut() {
                    *x = phi * *x + normal.sample(&mut rng);
                }
            }
        }
        let base = spec.profile_velocity(t);
        let v = Velocity3::new(
            base[0] + disturbance[0],
            base[1] + disturbance[1],
            base[2] + disturbance[2],
        );
        if v.norm() > spec.max_speed {
            return Err(Error::InvalidSpec(format!(
                "speed {:.3} m/s at t = {t} s exceeds the {} m/s limit",
                v.norm(),
                spec.max_speed
            )));
        }
        if k > 0 {
            if let DepthProfile::FollowVelocity { .. } = spec.depth {
                depth = (depth + velocity.last().map_or(0.0, |p: &Velocity3| p.vz)).max(0.0);
            }
        }
        time_s.push(t);
        velocity.push(v);
        depth_m.push(depth);
    }
    Ok(Trajectory {
        time_s,
        velocity,
        depth_m,
    })
}

/// Everything needed to generate a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub doppler: DopplerModel,
    #[serde(default = "default_pitch")]
    pub pitch_deg: f64,
    #[serde(default = "default_density")]
    pub water_density: f64,
    #[serde(default)]
    pub pressure_noise_kpa: f64,
    /// Number of missions; mission `i` uses seed `trajectory.seed + i`.
    #[serde(default = "default_missions")]
    pub missions: usize,
}

fn default_pitch() -> f64 {
    DEFAULT_PITCH_DEG
}
fn default_density() -> f64 {
    SEAWATER_DENSITY
}
fn default_missions() -> usize {
    1
}

impl Scenario {
    pub fn new(trajectory: TrajectorySpec) -> Self {
        Self {
            trajectory,
            doppler: DopplerModel::default(),
            pitch_deg: DEFAULT_PITCH_DEG,
            water_density: SEAWATER_DENSITY,
            pressure_noise_kpa: 0.0,
            missions: 1,
        }
    }
}

/// Beam and depth measurements for every epoch of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub beams: Vec<BeamVector>,
    pub depth: Vec<DepthMeasurement>,
}

pub fn measure_trajectory(
    traj: &Trajectory,
    geom: &BeamGeometry,
    dm: &DopplerModel,
    density: f64,
    pressure_noise_kpa: f64,
    seed: u64,
) -> Result<Measurements> {
    dm.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut beams = Vec::with_capacity(traj.len());
    let mut depth = Vec::with_capacity(traj.len());
    for (v, &d) in traj.velocity.iter().zip(&traj.depth_m) {
        beams.push(measure_beams(geom, dm, *v, &mut rng));
        depth.push(measure_depth(d, density, pressure_noise_kpa, &mut rng)?);
    }
    Ok(Measurements { beams, depth })
}

/// Canonical rows for one synthetic mission. Ground-truth velocity goes in
/// the velocity columns, depth is the pressure-derived value, and scripted
/// dropouts mark beams invalid.
pub fn export_synthetic(
    mission_id: &str,
    traj: &Trajectory,
    meas: &Measurements,
    dropouts: &[Dropout],
) -> Result<Vec<Record>> {
    if meas.beams.len() != traj.len() || meas.depth.len() != traj.len() || traj.velocity.len() != traj.len() {
        return Err(Error::InvalidSpec(format!(
            "length mismatch: {} epochs, {} beam and {} depth measurements",
            traj.len(),
            meas.beams.len(),
            meas.depth.len()
        )));
    }
    Ok((0..traj.len())
        .map(|k| {
            let t = traj.time_s[k];
            let dropped = dropouts
                .iter()
                .filter(|d| d.start_s <= t && t < d.end_s)
                .fold(BeamSet::EMPTY, |acc, d| acc.union(d.beams));
            let beams: [f64; NUM_BEAMS] = meas.beams[k].raw();
            Record {
                mission_id: mission_id.to_string(),
                sample: BeamSample {
                    time_s: t,
                    beams,
                    valid: dropped.complement(),
                    depth_m: Some(meas.depth[k].depth_m),
                    velocity: Some(traj.velocity[k]),
                },
                line: 0,
            }
        })
        .collect())
}

/// Mission id of the `i`th synthetic mission.
pub fn synthetic_mission_id(i: usize) -> String {
    format!("synthetic-{i:03}")
}

/// Generates every mission of a scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<Record>> {
    if scenario.missions == 0 {
        return Err(Error::InvalidSpec("scenario needs at least one mission".into()));
    }
    let geom = BeamGeometry::janus_degrees(scenario.pitch_deg)?;
    let mut records = Vec::new();
    for i in 0..scenario.missions {
        let mut spec = scenario.trajectory.clone();
        spec.seed = spec.seed.wrapping_add(i as u64);
        let traj = simulate_trajectory(&spec)?;
        let meas = measure_trajectory(
            &traj,
            &geom,
            &scenario.doppler,
            scenario.water_density,
            scenario.pressure_noise_kpa,
            spec.seed,
        )?;
        records.extend(export_synthetic(&synthetic_mission_id(i), &traj, &meas, &spec.dropouts)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn ideal_instrument_reports_projection() {
        let g = BeamGeometry::default();
        let v = Velocity3::new(1.2, -0.4, 0.3);
        let measured = measure_beams(&g, &DopplerModel::ideal(), v, &mut rng());
        let truth = g.forward_beams(v, BeamSet::ALL);
        for b in 1..=4 {
            assert!((measured.get(b).unwrap() - truth.get(b).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_propagates_to_one_centimetre() {
        let g = BeamGeometry::default();
        let mut dm = DopplerModel::ideal();
        dm.bias = 2.0 * dm.transmit_hz * 0.01 / (1000.0 * dm.sound_speed);
        let v = Velocity3::new(0.7, 0.1, -0.2);
        let measured = measure_beams(&g, &dm, v, &mut rng());
        let truth = g.forward_beams(v, BeamSet::ALL);
        for b in 1..=4 {
            assert!((measured.get(b).unwrap() - truth.get(b).unwrap() - 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn default_noise_is_one_centimetre() {
        let dm = DopplerModel::default();
        assert!((dm.noise_std - 0.008).abs() < 1e-15);
        assert!((dm.velocity_noise_std() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn depth_examples() {
        let m = measure_depth(0.0, 1025.0, 0.0, &mut rng()).unwrap();
        assert_eq!(m.pressure_kpa, 101.3);
        let m = measure_depth(100.0, 1025.0, 0.0, &mut rng()).unwrap();
        assert!((m.pressure_kpa - 1106.825).abs() < 1e-9);
        assert!((m.depth_m - 100.0).abs() < 1e-9);
        assert!(measure_depth(-1.0, 1025.0, 0.0, &mut rng()).is_err());
    }

    #[test]
    fn constant_and_sinusoidal_profiles() {
        let spec = TrajectorySpec::constant(Velocity3::new(1.0, 0.0, 0.0), 100, 1);
        let traj = simulate_trajectory(&spec).unwrap();
        assert_eq!(traj.len(), 100);
        assert!(traj.velocity.iter().all(|v| *v == Velocity3::new(1.0, 0.0, 0.0)));

        let mut spec = spec;
        spec.motion = MotionProfile::Sinusoidal {
            mean: [1.0, 0.0, 0.0],
            amplitude: [0.5, 0.0, 0.0],
            period_s: [60.0, 1.0, 1.0],
        };
        let traj = simulate_trajectory(&spec).unwrap();
        let dev = traj.velocity.iter().map(|v| (v.vx - 1.0).abs()).fold(0.0, f64::max);
        assert!((dev - 0.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let mut spec = TrajectorySpec::constant(Velocity3::new(1.0, 0.0, 0.0), 100, 1);
        spec.duration_s = 3;
        assert!(simulate_trajectory(&spec).is_err());
        let mut spec = TrajectorySpec::constant(Velocity3::new(4.0, 0.0, 0.0), 100, 1);
        assert!(simulate_trajectory(&spec).is_err());
        spec.motion = MotionProfile::Sinusoidal {
            mean: [0.0; 3],
            amplitude: [0.5, 0.0, 0.0],
            period_s: [0.0, 1.0, 1.0],
        };
        assert!(simulate_trajectory(&spec).is_err());
    }

    #[test]
    fn depth_follows_vertical_velocity() {
        let mut spec = TrajectorySpec::constant(Velocity3::new(1.0, 0.0, 0.5), 10, 1);
        spec.depth = DepthProfile::FollowVelocity { initial_m: 2.0 };
        let traj = simulate_trajectory(&spec).unwrap();
        assert_eq!(traj.depth_m[0], 2.0);
        assert!((traj.depth_m[9] - 6.5).abs() < 1e-12);
        spec.motion = MotionProfile::Constant {
            velocity: [1.0, 0.0, -0.5],
        };
        let traj = simulate_trajectory(&spec).unwrap();
        assert!(traj.depth_m.iter().all(|&d| d >= 0.0));
        assert_eq!(traj.depth_m[9], 0.0);
    }

    #[test]
    fn lawnmower_alternates_sway() {
        let mut spec = TrajectorySpec::constant(Velocity3::ZERO, 200, 1);
        spec.motion = MotionProfile::Lawnmower {
            speed: 1.5,
            leg_s: 40.0,
            turn_s: 10.0,
            turn_speed: 0.8,
            sway: 0.3,
            heave: 0.0,
        };
        let traj = simulate_trajectory(&spec).unwrap();
        assert_eq!(traj.velocity[10], Velocity3::new(1.5, 0.0, 0.0));
        assert!(traj.velocity[45].vy > 0.29);
        assert!(traj.velocity[95].vy < -0.29);
        assert!((traj.velocity[45].vx - 0.8).abs() < 1e-9);
    }

    #[test]
    fn dropouts_mark_beams_invalid() {
        let mut spec = TrajectorySpec::constant(Velocity3::new(1.0, 0.0, 0.0), 20, 3);
        spec.dropouts = vec![Dropout {
            start_s: 5.0,
            end_s: 8.0,
            beams: "1,2".parse().unwrap(),
        }];
        let records = run_scenario(&Scenario::new(spec)).unwrap();
        assert_eq!(records.len(), 20);
        let invalid: Vec<f64> = records
            .iter()
            .filter(|r| !r.sample.valid.is_full())
            .map(|r| r.sample.time_s)
            .collect();
        assert_eq!(invalid, vec![5.0, 6.0, 7.0]);
        assert_eq!(records[5].sample.valid, "3,4".parse().unwrap());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let spec = TrajectorySpec::constant(Velocity3::new(1.0, 0.0, 0.0), 10, 3);
        let traj = simulate_trajectory(&spec).unwrap();
        let meas = measure_trajectory(&traj, &BeamGeometry::default(), &DopplerModel::ideal(), 1025.0, 0.0, 0).unwrap();
        let short = Measurements {
            beams: meas.beams[..9].to_vec(),
            depth: meas.depth.clone(),
        };
        assert!(export_synthetic("m", &traj, &short, &[]).is_err());
    }
}

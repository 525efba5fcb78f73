//! Model-based estimates for missing beams.

use crate::beams::{BeamSet, BeamVector, Velocity3, NUM_BEAMS};
use crate::error::{Error, Result};
use crate::geometry::BeamGeometry;
use crate::sample::BeamSample;

/// Default moving-average window, epochs.
pub const DEFAULT_AVERAGE_WINDOW: usize = 6;

/// Past measurements available to a filler. `history` is ordered oldest
/// first; only the last `window` entries are used.
#[derive(Debug, Clone, Copy)]
pub struct FillerContext<'a> {
    pub history: &'a [BeamSample],
    pub window: usize,
    /// Previous epoch's velocity estimate.
    pub last_velocity: Option<Velocity3>,
}

/// Each missing beam is replaced by the mean of its last `window` measured
/// values. Every sample in the window must hold a valid value for the beam.
pub fn average_fill(ctx: &FillerContext<'_>, missing: BeamSet) -> Result<BeamVector> {
    if ctx.window == 0 {
        return Err(Error::InvalidSpec("average window must be at least 1".into()));
    }
    let mut values = [0.0; NUM_BEAMS];
    for beam in missing.iter() {
        let available = ctx.history.len();
        if available < ctx.window {
            return Err(Error::InsufficientHistory {
                beam,
                needed: ctx.window,
                available,
            });
        }
        let recent = &ctx.history[available - ctx.window..];
        let usable = recent
            .iter()
            .filter(|s| s.valid.contains(beam) && s.beams[beam - 1].is_finite())
            .count();
        if usable < ctx.window {
            return Err(Error::InsufficientHistory {
                beam,
                needed: ctx.window,
                available: usable,
            });
        }
        let sum: f64 = recent.iter().map(|s| s.beams[beam - 1]).sum();
        values[beam - 1] = sum / ctx.window as f64;
    }
    Ok(BeamVector::new(missing, values))
}

/// Each missing beam is the projection of the previous velocity estimate
/// onto that beam's direction.
pub fn virtual_beam_fill(geom: &BeamGeometry, last_velocity: Velocity3, missing: BeamSet) -> BeamVector {
    geom.forward_beams(last_velocity, missing)
}

/// [`virtual_beam_fill`] with the velocity taken from a context.
pub fn virtual_beam_fill_from(
    geom: &BeamGeometry,
    ctx: &FillerContext<'_>,
    missing: BeamSet,
) -> Result<BeamVector> {
    let v = ctx
        .last_velocity
        .ok_or_else(|| Error::InvalidSpec("virtual beam filler needs a previous velocity".into()))?;
    Ok(virtual_beam_fill(geom, v, missing))
}

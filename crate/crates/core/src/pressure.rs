//! Hydrostatic depth/pressure relation, `p = ρ g h + p₀` with `p` in kPa.

pub const GRAVITY: f64 = 9.81;
/// Atmospheric pressure at the surface, kPa.
pub const ATMOSPHERIC_KPA: f64 = 101.3;
/// Sea-water density, kg/m³.
pub const SEAWATER_DENSITY: f64 = 1025.0;

pub fn pressure_kpa(depth_m: f64, density: f64) -> f64 {
    density * GRAVITY * depth_m / 1000.0 + ATMOSPHERIC_KPA
}

pub fn depth_from_pressure(pressure_kpa: f64, density: f64) -> f64 {
    (pressure_kpa - ATMOSPHERIC_KPA) * 1000.0 / (density * GRAVITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_and_hundred_metres() {
        assert_eq!(pressure_kpa(0.0, SEAWATER_DENSITY), 101.3);
        // 1025 * 9.81 * 100 Pa = 1005.525 kPa, plus 101.3 kPa at the surface.
        assert!((pressure_kpa(100.0, 1025.0) - 1106.825).abs() < 1e-9);
        assert!((depth_from_pressure(1106.825, 1025.0) - 100.0).abs() < 1e-9);
    }
}

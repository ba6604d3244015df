//! Physical constants (CODATA 2018) and unit conversions.

use std::f64::consts::PI;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Couplings are computed in rad/µs and reported in kHz.
pub const KHZ_PER_MHZ: f64 = 1.0e3;

const METERS_PER_MICROMETER: f64 = 1.0e-6;
const RAD_PER_S_PER_RAD_PER_US: f64 = 1.0e6;

/// Convert a configured frequency in MHz to the internal angular value.
///
/// With `angular == true` the number is already ω (rad/µs); otherwise it is
/// a cyclic frequency ν and is multiplied by 2π.
pub fn ingest_mhz(value: f64, angular: bool) -> f64 {
    if angular {
        value
    } else {
        2.0 * PI * value
    }
}

pub(crate) fn micrometers_to_meters(x: f64) -> f64 {
    x * METERS_PER_MICROMETER
}

pub(crate) fn rad_per_us_to_rad_per_s(w: f64) -> f64 {
    w * RAD_PER_S_PER_RAD_PER_US
}

/// Zero-point length sqrt(ħ / 2 m Ω) in micrometers.
pub fn zero_point_length_um(mass_amu: f64, angular_freq: f64) -> f64 {
    let m = mass_amu * ATOMIC_MASS_UNIT;
    let w = rad_per_us_to_rad_per_s(angular_freq);
    (HBAR / (2.0 * m * w)).sqrt() / METERS_PER_MICROMETER
}

#![allow(dead_code)]

use ionspin::drives::{commensurate_wavevector, rabi_from_force, rabi_from_squeeze, wavevector_for_lamb_dicke, DriveConfig};
use ionspin::phonons::{Axis, ChainConfig, PerAxis};

pub const MASS: f64 = 40.0;
pub const SPACING: f64 = 5.0;
pub const OMEGA_X: f64 = 10.0;
pub const OMEGA_Z: f64 = 2.0;
pub const BARE_ETA: f64 = 0.2;

pub fn chain(n: usize, beta_x: f64, beta_z: f64) -> ChainConfig {
    ChainConfig::with_stiffness(
        n,
        SPACING,
        MASS,
        1,
        PerAxis { x: OMEGA_X, y: OMEGA_X, z: OMEGA_Z },
        PerAxis { x: beta_x, y: beta_x, z: beta_z },
    )
    .unwrap()
}

pub fn radial_wavevector() -> f64 {
    wavevector_for_lamb_dicke(BARE_ETA, MASS, OMEGA_X)
}

/// First-sideband radial drive, blue of the band by `delta`, with force `force`.
pub fn linear_drive(delta: f64, force: f64) -> DriveConfig {
    DriveConfig::from_bare_detuning(Axis::X, 1, rabi_from_force(force, BARE_ETA), -delta, OMEGA_X, radial_wavevector())
}

/// Second-sideband radial drive at twice the first drive's laser frequency.
pub fn squeeze_drive(delta: f64, squeeze: f64) -> DriveConfig {
    DriveConfig::from_bare_detuning(Axis::X, 2, rabi_from_squeeze(squeeze, BARE_ETA), -2.0 * delta, OMEGA_X, radial_wavevector())
}

/// Red-detuned, phase-uniform axial drive with unit intensity.
pub fn axial_template(delta_z: f64) -> DriveConfig {
    DriveConfig::from_bare_detuning(Axis::Z, 1, 1.0, delta_z, OMEGA_Z, commensurate_wavevector(1, SPACING))
        .with_phase_uniform(true)
}

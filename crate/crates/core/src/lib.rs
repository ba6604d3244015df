//! Trapped-ion simulator for competing two- and three-spin interactions.
//!
//! The crate has two layers. The device layer ([`phonons`], [`drives`],
//! [`couplings`]) turns a microtrap chain and a set of spin-dependent dipole
//! forces into an effective Ising coupling set. The model layer
//! ([`spin_model`], [`oracles`], [`dynamics`], [`scan`]) takes couplings,
//! either device-derived or supplied directly, and computes ground states,
//! order parameters, phase diagrams and adiabatic ramps.
//!
//! Frequency conventions: every frequency handled by the device layer is an
//! angular frequency in rad/µs (numerically "MHz" with ħ = 1). Spin couplings
//! and fields are reported in kHz, and ramp times are in 1/kHz.

pub mod couplings;
pub mod drives;
pub mod dynamics;
pub mod eigensolver;
mod error;
pub mod format;
mod linalg;
pub mod oracles;
pub mod phonons;
pub mod scan;
pub mod spin_model;
pub mod units;

pub use error::{Error, Result};

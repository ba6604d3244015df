//! Spin-dependent dipole forces, Lamb-Dicke parameters and sideband detunings.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::phonons::{Axis, ChainConfig, ChainSpectra, ModeSpectrum};
use crate::units::zero_point_length_um;
use crate::{Error, Result};

/// Thresholds above which the resolved-sideband or weak-coupling regime is flagged.
pub const DETUNING_RATIO_LIMIT: f64 = 0.25;
pub const RABI_RATIO_LIMIT: f64 = 0.25;

/// One Raman-induced dipole force.
///
/// `laser_freq` is the beat-note frequency ω_L of the Raman pair (rad/µs),
/// `wavevector` the difference wavevector k_L (1/µm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub axis: Axis,
    pub sideband_order: u8,
    pub rabi_freq: f64,
    pub laser_freq: f64,
    pub wavevector: f64,
    pub phase: f64,
    #[serde(default)]
    pub phase_uniform: bool,
}

impl DriveConfig {
    /// Drive placed by its bare detuning δ = s·ω_α − ω_L.
    pub fn from_bare_detuning(
        axis: Axis,
        sideband_order: u8,
        rabi_freq: f64,
        bare_detuning: f64,
        trap_freq: f64,
        wavevector: f64,
    ) -> Self {
        DriveConfig {
            axis,
            sideband_order,
            rabi_freq,
            laser_freq: f64::from(sideband_order) * trap_freq - bare_detuning,
            wavevector,
            phase: 0.0,
            phase_uniform: false,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_phase_uniform(mut self, uniform: bool) -> Self {
        self.phase_uniform = uniform;
        self
    }

    pub fn with_rabi(mut self, rabi_freq: f64) -> Self {
        self.rabi_freq = rabi_freq;
        self
    }

    /// Bare detuning s·ω_α − ω_L with respect to the trap frequency.
    pub fn bare_detuning(&self, chain: &ChainConfig) -> f64 {
        f64::from(self.sideband_order) * chain.trap_freq.get(self.axis) - self.laser_freq
    }

    pub fn validate(&self, chain: &ChainConfig) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfiguration(msg));
        if !matches!(self.sideband_order, 1 | 2) {
            return bad(format!("sideband_order must be 1 or 2, got {}", self.sideband_order));
        }
        if self.axis == Axis::Y {
            return bad("drives act along x (radial) or z (axial)".into());
        }
        if !(self.rabi_freq > 0.0 && self.rabi_freq.is_finite()) {
            return bad(format!("rabi_freq must be positive, got {}", self.rabi_freq));
        }
        if !(self.wavevector >= 0.0 && self.wavevector.is_finite()) {
            return bad(format!("wavevector must be nonnegative, got {}", self.wavevector));
        }
        if !self.laser_freq.is_finite() {
            return bad("laser_freq must be finite".into());
        }
        if self.axis == Axis::Z {
            if self.sideband_order != 1 {
                return bad("axial drives must use the first sideband".into());
            }
            if !self.phase_uniform {
                return bad("axial drives require phase_uniform = true".into());
            }
        }
        if self.phase_uniform && !is_lattice_commensurate(self.wavevector, chain.spacing_um) {
            return bad(format!(
                "phase_uniform requires k_L·a to be a multiple of 2π, got k_L·a = {}",
                self.wavevector * chain.spacing_um
            ));
        }
        Ok(())
    }
}

fn is_lattice_commensurate(wavevector: f64, spacing_um: f64) -> bool {
    let turns = wavevector * spacing_um / TAU;
    (turns - turns.round()).abs() < 1e-9 * turns.abs().max(1.0)
}

/// Wavevector (1/µm) that makes k_L·a an integer number `q` of turns.
pub fn commensurate_wavevector(q: u32, spacing_um: f64) -> f64 {
    TAU * f64::from(q) / spacing_um
}

/// Lamb-Dicke parameter η = k_L sqrt(ħ / 2 m Ω).
pub fn lamb_dicke(wavevector: f64, mass_amu: f64, mode_freq: f64) -> f64 {
    wavevector * zero_point_length_um(mass_amu, mode_freq)
}

/// Wavevector giving a prescribed Lamb-Dicke parameter at frequency `freq`.
pub fn wavevector_for_lamb_dicke(eta: f64, mass_amu: f64, freq: f64) -> f64 {
    eta / zero_point_length_um(mass_amu, freq)
}

/// Rabi frequency of a first-sideband drive with bare linear intensity F = Ω_L η / 2.
pub fn rabi_from_force(force: f64, bare_eta: f64) -> f64 {
    2.0 * force / bare_eta
}

/// Rabi frequency of a second-sideband drive with bare squeezing intensity M = Ω_L η² / 4.
pub fn rabi_from_squeeze(squeeze: f64, bare_eta: f64) -> f64 {
    4.0 * squeeze / (bare_eta * bare_eta)
}

/// Per-mode Lamb-Dicke parameters of `drive` on its axis.
pub fn mode_lamb_dicke(drive: &DriveConfig, chain: &ChainConfig, spectrum: &ModeSpectrum) -> Vec<f64> {
    spectrum
        .frequencies
        .iter()
        .map(|&f| lamb_dicke(drive.wavevector, chain.mass_amu, f))
        .collect()
}

/// Per-mode detunings δⁿ = s·Ω_n − ω_L.
///
/// A blue-detuned drive (ω_L above every s·Ω_n) gives all δⁿ < 0, a red one all δⁿ > 0.
pub fn detunings(drive: &DriveConfig, spectrum: &ModeSpectrum) -> Result<Vec<f64>> {
    if drive.axis != spectrum.axis {
        return Err(Error::InvalidInput(format!(
            "drive on axis {} applied to spectrum of axis {}",
            drive.axis, spectrum.axis
        )));
    }
    let s = f64::from(drive.sideband_order);
    spectrum
        .frequencies
        .iter()
        .enumerate()
        .map(|(n, &f)| {
            let d = s * f - drive.laser_freq;
            if d.abs() <= 1e-12 * s * f {
                Err(Error::Resonance {
                    axis: drive.axis.label(),
                    mode: n,
                    drive: 0,
                })
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// Detuning placement of a drive relative to its sideband.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Blue,
    Red,
    Inside,
}

pub fn placement(detunings: &[f64]) -> Placement {
    if detunings.iter().all(|&d| d < 0.0) {
        Placement::Blue
    } else if detunings.iter().all(|&d| d > 0.0) {
        Placement::Red
    } else {
        Placement::Inside
    }
}

/// Regime diagnostics for a single drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveRegime {
    pub axis: Axis,
    pub sideband_order: u8,
    pub detunings: Vec<f64>,
    pub detuning_ratios: Vec<f64>,
    pub rabi_ratios: Vec<f64>,
    pub worst_detuning_ratio: f64,
    pub worst_rabi_ratio: f64,
    pub placement: Placement,
    pub resolved_sidebands: bool,
    pub weak_coupling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub drives: Vec<DriveRegime>,
    pub worst_detuning_ratio: f64,
    pub worst_rabi_ratio: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Check |δⁿ|/Ω_n and Ω_L/Ω_n against the regime thresholds. Never fails on
/// thresholds; resonant drives are reported as warnings with infinite ratio.
pub fn validate_regime(drives: &[DriveConfig], spectra: &ChainSpectra) -> RegimeReport {
    let mut report = RegimeReport {
        drives: Vec::with_capacity(drives.len()),
        worst_detuning_ratio: 0.0,
        worst_rabi_ratio: 0.0,
        pass: true,
        warnings: Vec::new(),
    };
    for (i, drive) in drives.iter().enumerate() {
        let spectrum = spectra.get(drive.axis);
        let s = f64::from(drive.sideband_order);
        let det: Vec<f64> = spectrum
            .frequencies
            .iter()
            .map(|&f| s * f - drive.laser_freq)
            .collect();
        let detuning_ratios: Vec<f64> = det
            .iter()
            .zip(&spectrum.frequencies)
            .map(|(d, f)| if *d == 0.0 { f64::INFINITY } else { d.abs() / f })
            .collect();
        let rabi_ratios: Vec<f64> = spectrum.frequencies.iter().map(|f| drive.rabi_freq / f).collect();
        let worst_d = detuning_ratios.iter().copied().fold(0.0, f64::max);
        let worst_r = rabi_ratios.iter().copied().fold(0.0, f64::max);
        let resolved = worst_d <= DETUNING_RATIO_LIMIT;
        let weak = worst_r <= RABI_RATIO_LIMIT;
        if !resolved {
            report.warnings.push(format!(
                "drive {i} ({} axis, sideband {}): |delta|/Omega = {worst_d:.3} exceeds {DETUNING_RATIO_LIMIT}",
                drive.axis, drive.sideband_order
            ));
        }
        if !weak {
            report.warnings.push(format!(
                "drive {i} ({} axis, sideband {}): Omega_L/Omega = {worst_r:.3} exceeds {RABI_RATIO_LIMIT}",
                drive.axis, drive.sideband_order
            ));
        }
        report.pass &= resolved && weak;
        report.worst_detuning_ratio = report.worst_detuning_ratio.max(worst_d);
        report.worst_rabi_ratio = report.worst_rabi_ratio.max(worst_r);
        report.drives.push(DriveRegime {
            axis: drive.axis,
            sideband_order: drive.sideband_order,
            placement: placement(&det),
            detunings: det,
            detuning_ratios,
            rabi_ratios,
            worst_detuning_ratio: worst_d,
            worst_rabi_ratio: worst_r,
            resolved_sidebands: resolved,
            weak_coupling: weak,
        });
    }
    report
}

/// Site phases k_L·j·a of a drive along the chain.
pub fn site_phases(drive: &DriveConfig, chain: &ChainConfig) -> Vec<f64> {
    (0..chain.n_ions)
        .map(|j| drive.wavevector * j as f64 * chain.spacing_um)
        .collect()
}

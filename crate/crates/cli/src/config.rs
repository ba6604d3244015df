//! Experiment configuration file.
//!
//! One JSON document with the top-level sections `chain`, `drives`, `model`,
//! `scan`, `ramp` and `output`. Device frequencies are given in MHz and read
//! as angular frequencies unless `chain.angular` is false, in which case they
//! are cyclic and multiplied by 2π on ingestion. Spin couplings, fields and
//! screening targets are in kHz; ramp times are in 1/kHz.

use std::path::Path;

use ionspin::couplings::{dipolar_couplings, CouplingSet, TripleCoupling};
use ionspin::drives::{
    commensurate_wavevector, rabi_from_force, rabi_from_squeeze, wavevector_for_lamb_dicke, DriveConfig,
};
use ionspin::dynamics::{FidelityTarget, RampGeometry, RampPoint, RampSchedule};
use ionspin::phonons::{Axis, ChainConfig, PerAxis};
use ionspin::scan::AxisRange;
use ionspin::spin_model::{CouplingRange, SpinState};
use ionspin::units::ingest_mhz;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drives: Vec<DriveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<RampSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Triple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<Triple> for PerAxis<f64> {
    fn from(t: Triple) -> Self {
        PerAxis { x: t.x, y: t.y, z: t.z }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub n_ions: usize,
    pub spacing_um: f64,
    pub mass_amu: f64,
    #[serde(default = "one")]
    pub charge: u32,
    pub trap_freq_mhz: Triple,
    /// Dimensionless β per axis; derived from the physical fields when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<Triple>,
    #[serde(default = "yes")]
    pub angular: bool,
}

impl ChainSection {
    pub fn to_chain(&self) -> Result<ChainConfig, CliError> {
        let freq = PerAxis::from(self.trap_freq_mhz).map(|_, v| ingest_mhz(v, self.angular));
        let chain = match self.stiffness {
            Some(beta) => ChainConfig::with_stiffness(
                self.n_ions,
                self.spacing_um,
                self.mass_amu,
                self.charge,
                freq,
                beta.into(),
            )?,
            None => ChainConfig::from_physical(self.n_ions, self.spacing_um, self.mass_amu, self.charge, freq)?,
        };
        Ok(chain)
    }

    /// Internal angular frequency back in the configured convention.
    pub fn report_mhz(&self, angular_value: f64) -> f64 {
        if self.angular {
            angular_value
        } else {
            angular_value / std::f64::consts::TAU
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveAxis {
    X,
    Z,
}

/// One dipole force. Exactly one of each alternative group must be given:
/// `rabi_freq_mhz` or `intensity_mhz`; `detuning_mhz` or `laser_freq_mhz`;
/// `wavevector_per_um`, `lamb_dicke` or `lattice_multiple`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub axis: DriveAxis,
    #[serde(default = "one_u8")]
    pub sideband_order: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_freq_mhz: Option<f64>,
    /// Force F (first sideband) or squeezing M (second sideband) at the trap frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_mhz: Option<f64>,
    /// Bare detuning s·ω_α − ω_L; negative values are blue of the sideband.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser_freq_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavevector_per_um: Option<f64>,
    /// Lamb-Dicke parameter at the trap frequency of the drive axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lamb_dicke: Option<f64>,
    /// Wavevector 2πq/a, commensurate with the lattice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_multiple: Option<u32>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub phase_uniform: bool,
}

fn one_u8() -> u8 {
    1
}

fn exactly_one(index: usize, names: &[&str], given: &[bool]) -> Result<(), CliError> {
    let count = given.iter().filter(|&&g| g).count();
    if count == 1 {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "drives[{index}]: give exactly one of {}",
            names.join(", ")
        )))
    }
}

impl DriveSection {
    pub fn to_drive(&self, index: usize, chain: &ChainConfig, angular: bool) -> Result<DriveConfig, CliError> {
        exactly_one(
            index,
            &["rabi_freq_mhz", "intensity_mhz"],
            &[self.rabi_freq_mhz.is_some(), self.intensity_mhz.is_some()],
        )?;
        exactly_one(
            index,
            &["detuning_mhz", "laser_freq_mhz"],
            &[self.detuning_mhz.is_some(), self.laser_freq_mhz.is_some()],
        )?;
        exactly_one(
            index,
            &["wavevector_per_um", "lamb_dicke", "lattice_multiple"],
            &[
                self.wavevector_per_um.is_some(),
                self.lamb_dicke.is_some(),
                self.lattice_multiple.is_some(),
            ],
        )?;
        let axis = match self.axis {
            DriveAxis::X => Axis::X,
            DriveAxis::Z => Axis::Z,
        };
        let trap = chain.trap_freq.get(axis);
        let wavevector = match (self.wavevector_per_um, self.lamb_dicke, self.lattice_multiple) {
            (Some(k), _, _) => k,
            (_, Some(eta), _) => wavevector_for_lamb_dicke(eta, chain.mass_amu, trap),
            (_, _, Some(q)) => commensurate_wavevector(q, chain.spacing_um),
            _ => unreachable!(),
        };
        let rabi = match (self.rabi_freq_mhz, self.intensity_mhz) {
            (Some(r), _) => ingest_mhz(r, angular),
            (_, Some(i)) => {
                let eta = ionspin::drives::lamb_dicke(wavevector, chain.mass_amu, trap);
                let i = ingest_mhz(i, angular);
                if self.sideband_order == 2 {
                    rabi_from_squeeze(i, eta)
                } else {
                    rabi_from_force(i, eta)
                }
            }
            _ => unreachable!(),
        };
        let laser_freq = match (self.detuning_mhz, self.laser_freq_mhz) {
            (Some(d), _) => f64::from(self.sideband_order) * trap - ingest_mhz(d, angular),
            (_, Some(l)) => ingest_mhz(l, angular),
            _ => unreachable!(),
        };
        let drive = DriveConfig {
            axis,
            sideband_order: self.sideband_order,
            rabi_freq: rabi,
            laser_freq,
            wavevector,
            phase: self.phase,
            phase_uniform: self.phase_uniform,
        };
        drive
            .validate(chain)
            .map_err(|e| CliError::validation(format!("drives[{index}]: {e}")))?;
        Ok(drive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    #[default]
    NearestNeighbour,
    Dipolar,
}

/// The spin model. Setting `j2_khz`, `j3_khz`, `bonds` or `triples` selects
/// direct couplings on `n` spins; otherwise couplings are derived from the
/// chain and drives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub h_khz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j2_khz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j3_khz: Option<f64>,
    #[serde(default)]
    pub geometry: Geometry,
    /// Explicit (j, k, J_jk) entries, added on top of the uniform values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bonds: Vec<(usize, usize, f64)>,
    /// Explicit (j, k, l, J_jkl) entries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triples: Vec<(usize, usize, usize, f64)>,
    #[serde(default)]
    pub range: CouplingRange,
    /// Nearest-neighbour 2-spin target for the axial screening drive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening_target_khz: Option<f64>,
}

impl ModelSection {
    pub fn is_direct(&self) -> bool {
        self.j2_khz.is_some() || self.j3_khz.is_some() || !self.bonds.is_empty() || !self.triples.is_empty()
    }

    /// Couplings given directly in the model section.
    pub fn direct_couplings(&self) -> Result<(usize, CouplingSet), CliError> {
        let n = self
            .n
            .ok_or_else(|| CliError::validation("model.n is required for direct couplings"))?;
        if n < 2 {
            return Err(CliError::validation(format!("model.n must be at least 2, got {n}")));
        }
        let j2 = self.j2_khz.unwrap_or(0.0);
        let j3 = self.j3_khz.unwrap_or(0.0);
        let (mut m, mut t) = match self.geometry {
            Geometry::Dipolar => dipolar_couplings(n, j2, j3),
            Geometry::NearestNeighbour => {
                let m = DMatrix::from_fn(n, n, |a, b| if a.abs_diff(b) == 1 { j2 } else { 0.0 });
                let t = (0..n.saturating_sub(2))
                    .filter(|_| j3 != 0.0)
                    .map(|l| TripleCoupling { j: l + 2, k: l + 1, l, value: j3 })
                    .collect();
                (m, t)
            }
        };
        for (i, &(a, b, v)) in self.bonds.iter().enumerate() {
            if a >= n || b >= n || a == b {
                return Err(CliError::validation(format!(
                    "model.bonds[{i}]: indices ({a}, {b}) must be distinct and below n = {n}"
                )));
            }
            m[(a, b)] += v;
            m[(b, a)] += v;
        }
        for (i, &(a, b, c, v)) in self.triples.iter().enumerate() {
            let mut idx = [a, b, c];
            idx.sort_unstable();
            if idx[2] >= n || idx[0] == idx[1] || idx[1] == idx[2] {
                return Err(CliError::validation(format!(
                    "model.triples[{i}]: indices ({a}, {b}, {c}) must be distinct and below n = {n}"
                )));
            }
            t.push(TripleCoupling { j: idx[2], k: idx[1], l: idx[0], value: v });
        }
        Ok((n, CouplingSet::new(m, t, self.h_khz)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl From<AxisSection> for AxisRange {
    fn from(a: AxisSection) -> Self {
        AxisRange::new(a.min, a.max, a.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    #[default]
    NearestNeighbour,
    Dipolar,
    /// Shapes of the device-derived couplings, rescaled to the grid values.
    Device,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub n: usize,
    pub h_khz: f64,
    pub j2_khz: AxisSection,
    pub j3_khz: AxisSection,
    #[serde(default)]
    pub model: ScanKind,
    #[serde(default)]
    pub range: CouplingRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub j2_khz: f64,
    pub j3_khz: f64,
    pub h_khz: f64,
}

impl From<PointSection> for RampPoint {
    fn from(p: PointSection) -> Self {
        RampPoint { j2: p.j2_khz, j3: p.j3_khz, h: p.h_khz }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    #[default]
    Linear,
    Exponential,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    #[default]
    Ghz,
    W,
    FerriManifold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSection {
    /// Spins in an open chain; absent means the 3-ion Paul trap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_n: Option<usize>,
    #[serde(default)]
    pub shape: ShapeKind,
    /// Total time (1/kHz); ignored for tables, which end at their last knot.
    #[serde(default)]
    pub duration: f64,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<PointSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<PointSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table_values: Vec<PointSection>,
    /// Ket label such as "↑↓↑" or "udu"; absent means every spin along +x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    #[serde(default)]
    pub targets: Vec<TargetKind>,
    #[serde(default = "one_usize")]
    pub sample_every: usize,
}

fn one_usize() -> usize {
    1
}

impl RampSection {
    pub fn geometry(&self) -> RampGeometry {
        match self.chain_n {
            Some(n) => RampGeometry::Chain { n },
            None => RampGeometry::PaulTrap,
        }
    }

    pub fn schedule(&self) -> Result<RampSchedule, CliError> {
        let g = self.geometry();
        let endpoints = || -> Result<(RampPoint, RampPoint), CliError> {
            match (self.start, self.end) {
                (Some(a), Some(b)) => Ok((a.into(), b.into())),
                _ => Err(CliError::validation("ramp.start and ramp.end are required for this shape")),
            }
        };
        let s = match self.shape {
            ShapeKind::Linear => {
                let (a, b) = endpoints()?;
                RampSchedule::linear(g, a, b, self.duration, self.steps)?
            }
            ShapeKind::Exponential => {
                let (a, b) = endpoints()?;
                RampSchedule::exponential(g, a, b, self.duration, self.steps)?
            }
            ShapeKind::Table => RampSchedule::table(
                g,
                self.table_times.clone(),
                self.table_values.iter().map(|&p| p.into()).collect(),
                self.steps,
            )?,
        };
        Ok(s)
    }

    pub fn initial_state(&self) -> Result<SpinState, CliError> {
        let n = self.geometry().n_spins();
        let state = match &self.initial {
            None => SpinState::x_polarized(n),
            Some(label) => SpinState::from_ket(label)?,
        };
        if state.n_spins() != n {
            return Err(CliError::validation(format!(
                "ramp.initial has {} spins, the ramp has {n}",
                state.n_spins()
            )));
        }
        Ok(state)
    }

    pub fn targets(&self) -> Vec<FidelityTarget> {
        self.targets
            .iter()
            .map(|t| match t {
                TargetKind::Ghz => FidelityTarget::Ghz,
                TargetKind::W => FidelityTarget::W,
                TargetKind::FerriManifold => FidelityTarget::FerrimagneticManifold,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Prefix for every file name written.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prefix: String,
}

/// Written next to scan results; loading it as a config reruns the scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub variant: ionspin::couplings::ThreeSpinVariant,
    pub config: serde_json::Value,
}

pub const TOOL_NAME: &str = "ionspin";

/// A loaded configuration with the raw document it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub raw: serde_json::Value,
    /// Variant recorded in a metadata file, if the input was one.
    pub recorded_variant: Option<ionspin::couplings::ThreeSpinVariant>,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

pub fn parse(text: &str, origin: &str) -> Result<Loaded, CliError> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::parse(origin, &e))?;
    let is_metadata = raw.get("tool").and_then(|t| t.as_str()) == Some(TOOL_NAME) && raw.get("config").is_some();
    if is_metadata {
        let meta: Metadata = serde_json::from_value(raw).map_err(|e| CliError::validation(format!("{origin}: {e}")))?;
        // re-serialize so line numbers in errors refer to the embedded document
        let inner = serde_json::to_string_pretty(&meta.config).expect("serializable value");
        let mut loaded = parse_config(&inner, &format!("{origin} (embedded config)"))?;
        loaded.recorded_variant = Some(meta.variant);
        return Ok(loaded);
    }
    parse_config(text, origin)
}

fn parse_config(text: &str, origin: &str) -> Result<Loaded, CliError> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::parse(origin, &e))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let config: Config = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        CliError::parse_at(origin, &path, e.inner())
    })?;
    Ok(Loaded { config, raw, recorded_variant: None })
}

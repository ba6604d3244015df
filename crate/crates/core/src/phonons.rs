//! Normal modes of an equispaced ion chain in an array of microtraps.
//!
//! The small-oscillation Coulomb matrix `V` of a chain with unit spacing is
//! diagonalized once; each axis then gets its mode frequencies from
//! `Ω_n = ω · sqrt(1 + c β V_n)` with `c = 1` for the radial axes and
//! `c = -2` for the axial one.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::units::{micrometers_to_meters, rad_per_us_to_rad_per_s, ATOMIC_MASS_UNIT};
use crate::units::{ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Sign and weight of the Coulomb correction along this axis.
    pub fn coulomb_factor(self) -> f64 {
        match self {
            Axis::X | Axis::Y => 1.0,
            Axis::Z => -2.0,
        }
    }

    pub fn label(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// One value per Cartesian axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerAxis<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Copy> PerAxis<T> {
    pub fn splat(v: T) -> Self {
        PerAxis { x: v, y: v, z: v }
    }

    pub fn get(&self, axis: Axis) -> T {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Axis, T) -> U) -> PerAxis<U> {
        PerAxis {
            x: f(Axis::X, self.x),
            y: f(Axis::Y, self.y),
            z: f(Axis::Z, self.z),
        }
    }
}

/// Geometry, species and confinement of the chain.
///
/// Trap frequencies are angular, in rad/µs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_ions: usize,
    pub spacing_um: f64,
    pub mass_amu: f64,
    pub charge: u32,
    pub trap_freq: PerAxis<f64>,
    pub stiffness: PerAxis<f64>,
}

impl ChainConfig {
    /// Chain with stiffness parameters given directly.
    pub fn with_stiffness(
        n_ions: usize,
        spacing_um: f64,
        mass_amu: f64,
        charge: u32,
        trap_freq: PerAxis<f64>,
        stiffness: PerAxis<f64>,
    ) -> Result<Self> {
        let chain = ChainConfig {
            n_ions,
            spacing_um,
            mass_amu,
            charge,
            trap_freq,
            stiffness,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Chain whose stiffness parameters follow from the physical fields.
    pub fn from_physical(
        n_ions: usize,
        spacing_um: f64,
        mass_amu: f64,
        charge: u32,
        trap_freq: PerAxis<f64>,
    ) -> Result<Self> {
        check_positive("mass_amu", mass_amu)?;
        check_positive("spacing_um", spacing_um)?;
        for axis in Axis::ALL {
            check_positive(&format!("trap_freq.{axis}"), trap_freq.get(axis))?;
        }
        let stiffness =
            trap_freq.map(|_, w| beta_from_physical(mass_amu, charge, w, spacing_um));
        Self::with_stiffness(n_ions, spacing_um, mass_amu, charge, trap_freq, stiffness)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 2 {
            return Err(Error::InvalidConfiguration(format!(
                "n_ions must be at least 2, got {}",
                self.n_ions
            )));
        }
        check_positive("spacing_um", self.spacing_um)?;
        check_positive("mass_amu", self.mass_amu)?;
        if self.charge == 0 {
            return Err(Error::InvalidConfiguration("charge must be nonzero".into()));
        }
        for axis in Axis::ALL {
            check_positive(&format!("trap_freq.{axis}"), self.trap_freq.get(axis))?;
            check_positive(&format!("stiffness.{axis}"), self.stiffness.get(axis))?;
        }
        Ok(())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfiguration(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Stiffness β = Z²e² / (4πε₀ m ω² a³) with ω in rad/µs and a in µm.
pub fn beta_from_physical(mass_amu: f64, charge: u32, trap_freq: f64, spacing_um: f64) -> f64 {
    let q = f64::from(charge) * ELEMENTARY_CHARGE;
    let m = mass_amu * ATOMIC_MASS_UNIT;
    let w = rad_per_us_to_rad_per_s(trap_freq);
    let a = micrometers_to_meters(spacing_um);
    q * q / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * m * w * w * a * a * a)
}

/// Dimensionless Coulomb matrix of an equispaced chain.
pub fn coulomb_matrix(n_ions: usize) -> Result<DMatrix<f64>> {
    if n_ions < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "coulomb matrix needs at least 2 ions, got {n_ions}"
        )));
    }
    let mut v = DMatrix::zeros(n_ions, n_ions);
    for j in 0..n_ions {
        for k in 0..n_ions {
            if j != k {
                let d = j.abs_diff(k) as f64;
                v[(j, k)] = 1.0 / (d * d * d);
            }
        }
    }
    for j in 0..n_ions {
        let row: f64 = (0..n_ions).filter(|&k| k != j).map(|k| v[(j, k)]).sum();
        v[(j, j)] = -row;
    }
    Ok(v)
}

/// Eigen-decomposition of a symmetric matrix with deterministic ordering and signs.
///
/// Eigenvalues ascend. Each column has its largest-magnitude entry positive.
/// Exactly degenerate eigenvalues are ordered lexicographically by their
/// (sign-normalized) eigenvectors. Eigenvalues below `1e-12 ‖V‖` in magnitude
/// are snapped to zero.
pub fn normal_modes(v: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = v.nrows();
    if n == 0 || v.ncols() != n {
        return Err(Error::InvalidInput("matrix must be square and non-empty".into()));
    }
    let scale = v.amax().max(1.0);
    for j in 0..n {
        for k in (j + 1)..n {
            if (v[(j, k)] - v[(k, j)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({j}, {k})"
                )));
            }
        }
    }

    let eig = crate::linalg::sym_eigen(v);
    let mut modes: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|c| {
            let mut col: Vec<f64> = eig.vectors.column(c).iter().copied().collect();
            normalize_sign(&mut col);
            let mut val = eig.values[c];
            if val.abs() < 1e-12 * scale {
                val = 0.0;
            }
            (val, col)
        })
        .collect();

    let tie = 1e-10 * scale;
    modes.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            lexicographic(&a.1, &b.1)
        } else {
            a.0.total_cmp(&b.0)
        }
    });

    let eigenvalues = modes.iter().map(|m| m.0).collect();
    let mode_matrix = DMatrix::from_fn(n, n, |j, c| modes[c].1[j]);
    Ok((eigenvalues, mode_matrix))
}

fn normalize_sign(col: &mut [f64]) {
    // first index wins among equal magnitudes
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() + 1e-12 {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.iter_mut().for_each(|x| *x = -*x);
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-12 {
            return x.total_cmp(y);
        }
    }
    std::cmp::Ordering::Equal
}

/// Mode frequencies Ω_n = ω (1 + c β V_n)^{1/2} along `axis`.
pub fn mode_frequencies(eigenvalues: &[f64], axis: Axis, chain: &ChainConfig) -> Result<Vec<f64>> {
    let w = chain.trap_freq.get(axis);
    let beta = chain.stiffness.get(axis);
    if !(w > 0.0 && beta > 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "trap frequency and stiffness on axis {axis} must be positive"
        )));
    }
    let c = axis.coulomb_factor();
    eigenvalues
        .iter()
        .enumerate()
        .map(|(mode, &ev)| {
            let arg = 1.0 + c * beta * ev;
            if arg <= 0.0 {
                Err(Error::StructuralInstability {
                    axis: axis.label(),
                    mode,
                    value: arg,
                })
            } else {
                Ok(w * arg.sqrt())
            }
        })
        .collect()
}

/// Normal-mode spectrum along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub axis: Axis,
    pub eigenvalues: Vec<f64>,
    pub mode_matrix: DMatrix<f64>,
    pub frequencies: Vec<f64>,
}

impl ModeSpectrum {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Band-width bound from the stiff-limit expansion, valid while c·β·|V| stays below about 0.8.
    pub fn band_bound(&self, chain: &ChainConfig) -> f64 {
        let c = self.axis.coulomb_factor().abs();
        let beta = chain.stiffness.get(self.axis);
        let w = chain.trap_freq.get(self.axis);
        let (lo, hi) = min_max(&self.eigenvalues);
        let vmax = lo.abs().max(hi.abs());
        0.5 * c * beta * w * (hi - lo) * (1.0 + 0.5 * c * beta * vmax)
    }

    pub fn band_width(&self) -> f64 {
        let (lo, hi) = min_max(&self.frequencies);
        hi - lo
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Spectra of all three axes of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpectra {
    pub x: ModeSpectrum,
    pub y: ModeSpectrum,
    pub z: ModeSpectrum,
}

impl ChainSpectra {
    pub fn compute(chain: &ChainConfig) -> Result<Self> {
        chain.validate()?;
        let v = coulomb_matrix(chain.n_ions)?;
        let (eigenvalues, mode_matrix) = normal_modes(&v)?;
        let spectrum = |axis| -> Result<ModeSpectrum> {
            Ok(ModeSpectrum {
                axis,
                frequencies: mode_frequencies(&eigenvalues, axis, chain)?,
                eigenvalues: eigenvalues.clone(),
                mode_matrix: mode_matrix.clone(),
            })
        };
        Ok(ChainSpectra {
            x: spectrum(Axis::X)?,
            y: spectrum(Axis::Y)?,
            z: spectrum(Axis::Z)?,
        })
    }

    pub fn get(&self, axis: Axis) -> &ModeSpectrum {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }
}

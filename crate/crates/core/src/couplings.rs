//! Effective spin-spin couplings obtained by eliminating the phonons.
//!
//! Internally every sum is evaluated in rad/µs; the public results are in kHz.
//!
//! Sign convention for the 2-spin terms: eliminating an off-resonant mode at
//! detuning ν lowers the energy, so each drive contributes
//! `J_jk = -Σ_{n,λ} (Ω_L/2)² η_n² M_jn M_kn / (Ω_n − λ ω_L)`.
//! A blue-detuned radial drive then gives J > 0 (antiferromagnetic) and a
//! red-detuned axial drive J < 0, which is what makes screening possible.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::drives::{
    detunings, lamb_dicke, mode_lamb_dicke, placement, validate_regime, DriveConfig, Placement,
    RegimeReport,
};
use crate::phonons::{Axis, ChainConfig, ChainSpectra, ModeSpectrum};
use crate::units::KHZ_PER_MHZ;
use crate::{Error, Result};

const EXCHANGE_SIGN: f64 = -1.0;

/// Which Lamb-Dicke factors enter the second mode sum of the 3-spin coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThreeSpinVariant {
    /// `(η_n1 η_n2)²` attached to mode n, bare `M_jm M_lm` for mode m.
    #[default]
    Eq6Literal,
    /// `η_n1 η_n2` for mode n and `η_m1 η_m2` for mode m.
    Eq6Corrected,
}

impl std::str::FromStr for ThreeSpinVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq6-literal" => Ok(Self::Eq6Literal),
            "eq6-corrected" => Ok(Self::Eq6Corrected),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown variant {other:?}, expected eq6-literal or eq6-corrected"
            ))),
        }
    }
}

/// Coefficient of σ_j σ_k σ_l, stored with j > k > l.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleCoupling {
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub value: f64,
}

/// Residual-error estimates of the effective Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub eps_f: f64,
    pub eps_m: f64,
    pub eps_mf: f64,
    pub total: f64,
}

/// Record of what produced a device-derived coupling set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub chain: ChainConfig,
    pub drives: Vec<DriveConfig>,
    pub variant: ThreeSpinVariant,
}

/// Couplings of the effective spin Hamiltonian, all in kHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub n: usize,
    #[serde(with = "rows")]
    pub j2: DMatrix<f64>,
    pub j3: Vec<TripleCoupling>,
    pub field_h: f64,
    pub provenance: Option<Provenance>,
    pub error_budget: Option<ErrorBudget>,
}

impl CouplingSet {
    pub fn new(j2: DMatrix<f64>, j3: Vec<TripleCoupling>, field_h: f64) -> Result<Self> {
        let set = CouplingSet {
            n: j2.nrows(),
            j2,
            j3,
            field_h,
            provenance: None,
            error_budget: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.j2.nrows() != n || self.j2.ncols() != n {
            return Err(Error::InvalidInput("j2 must be an n x n matrix".into()));
        }
        for j in 0..n {
            if self.j2[(j, j)] != 0.0 {
                return Err(Error::InvalidInput(format!("j2 diagonal entry {j} must be zero")));
            }
            for k in 0..j {
                if self.j2[(j, k)] != self.j2[(k, j)] {
                    return Err(Error::InvalidInput(format!("j2 is not symmetric at ({j}, {k})")));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.j3 {
            if t.j >= n || t.k >= n || t.l >= n {
                return Err(Error::IndexOutOfRange(format!(
                    "triple ({}, {}, {}) outside chain of {n} spins",
                    t.j, t.k, t.l
                )));
            }
            if !(t.j > t.k && t.k > t.l) {
                return Err(Error::InvalidInput(format!(
                    "triple ({}, {}, {}) must satisfy j > k > l",
                    t.j, t.k, t.l
                )));
            }
            if !seen.insert((t.j, t.k, t.l)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate triple ({}, {}, {})",
                    t.j, t.k, t.l
                )));
            }
        }
        Ok(())
    }

    /// Mean of the nearest-neighbour 2-spin entries.
    pub fn mean_nearest_neighbour(&self) -> f64 {
        mean_nearest_neighbour(&self.j2)
    }
}

mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("j2 must be a square matrix"));
        }
        Ok(DMatrix::from_fn(n, n, |j, k| rows[j][k]))
    }
}

pub fn mean_nearest_neighbour(j2: &DMatrix<f64>) -> f64 {
    let n = j2.nrows();
    if n < 2 {
        return 0.0;
    }
    (0..n - 1).map(|j| j2[(j + 1, j)]).sum::<f64>() / (n - 1) as f64
}

/// Contribution of one linear drive to the 2-spin matrix, in rad/µs, diagonal kept.
///
/// `mode_matrix` columns are normal modes with frequencies `freqs` and
/// Lamb-Dicke parameters `etas`.
pub fn drive_exchange_matrix(
    mode_matrix: &DMatrix<f64>,
    freqs: &[f64],
    etas: &[f64],
    rabi_freq: f64,
    laser_freq: f64,
) -> std::result::Result<DMatrix<f64>, usize> {
    let amp = 0.25 * rabi_freq * rabi_freq;
    let mut weights = DVector::zeros(freqs.len());
    for (n, (&f, &eta)) in freqs.iter().zip(etas).enumerate() {
        let mut w = 0.0;
        for lambda in [1.0, -1.0] {
            let den = f - lambda * laser_freq;
            if den.abs() <= 1e-12 * f.abs() {
                return Err(n);
            }
            w += 1.0 / den;
        }
        weights[n] = EXCHANGE_SIGN * amp * eta * eta * w;
    }
    let scaled = mode_matrix * DMatrix::from_diagonal(&weights);
    let n = mode_matrix.nrows();
    // fill one triangle and mirror so the result is exactly symmetric
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let v = scaled.row(j).dot(&mode_matrix.row(k));
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    Ok(out)
}

fn axis_exchange(
    chain: &ChainConfig,
    spectrum: &ModeSpectrum,
    drive: &DriveConfig,
    index: usize,
) -> Result<DMatrix<f64>> {
    let etas = mode_lamb_dicke(drive, chain, spectrum);
    drive_exchange_matrix(
        &spectrum.mode_matrix,
        &spectrum.frequencies,
        &etas,
        drive.rabi_freq,
        drive.laser_freq,
    )
    .map_err(|mode| Error::Resonance {
        axis: drive.axis.label(),
        mode,
        drive: index,
    })
}

/// Effective 2-spin matrix J⁽²⁾ (kHz) summed over every drive and axis.
///
/// Each drive acts as a linear force on its axis; second-sideband drives
/// contribute through their far-detuned linear part. Self-energies on the
/// diagonal are dropped.
pub fn two_spin_couplings(
    chain: &ChainConfig,
    spectra: &ChainSpectra,
    drives: &[DriveConfig],
) -> Result<DMatrix<f64>> {
    let n = chain.n_ions;
    let mut total = DMatrix::zeros(n, n);
    for (i, drive) in drives.iter().enumerate() {
        total += axis_exchange(chain, spectra.get(drive.axis), drive, i)?;
    }
    total *= KHZ_PER_MHZ;
    total.fill_diagonal(0.0);
    Ok(total)
}

/// Effective 3-spin couplings (kHz) from the linear and squeezing radial drives.
///
/// For each unordered triple the stored value sums the mode-sum kernel over
/// all six assignments of the three ions to the (j, k, l) slots, i.e. the full
/// coefficient multiplying σ_j σ_k σ_l. Triples with exactly zero coupling are
/// omitted.
pub fn three_spin_couplings(
    chain: &ChainConfig,
    radial: &ModeSpectrum,
    linear: &DriveConfig,
    squeeze: &DriveConfig,
    variant: ThreeSpinVariant,
) -> Result<Vec<TripleCoupling>> {
    if radial.axis != Axis::X || linear.axis != Axis::X || squeeze.axis != Axis::X {
        return Err(Error::InvalidConfiguration(
            "3-spin couplings need radial (x) drives and the x spectrum".into(),
        ));
    }
    if linear.sideband_order != 1 || squeeze.sideband_order != 2 {
        return Err(Error::InvalidConfiguration(
            "3-spin couplings need a first-sideband and a second-sideband drive".into(),
        ));
    }
    if (squeeze.laser_freq - 2.0 * linear.laser_freq).abs() > 1e-9 * squeeze.laser_freq.abs() {
        return Err(Error::InvalidConfiguration(format!(
            "second-sideband laser frequency {} must equal twice the first ({})",
            squeeze.laser_freq, linear.laser_freq
        )));
    }
    detunings(linear, radial).map_err(|_| resonance_of(linear, radial))?;

    let mut cos_phase = linear.phase.cos();
    if cos_phase.abs() < 1e-12 {
        cos_phase = 0.0;
    }
    let n_ions = radial.n_modes();
    if cos_phase == 0.0 || n_ions < 3 {
        return Ok(Vec::new());
    }

    let eta1 = mode_lamb_dicke(linear, chain, radial);
    let eta2 = mode_lamb_dicke(squeeze, chain, radial);
    let prefactor = 0.25 * linear.rabi_freq.powi(2) * 0.5 * squeeze.rabi_freq * cos_phase;
    let m = &radial.mode_matrix;

    // kernel[j][k][l] = Σ_λ first_λ(j, k) second_λ(j, l)
    let mut pairs = Vec::with_capacity(2);
    for lambda in [1.0, -1.0] {
        let mut w_first = DVector::zeros(n_ions);
        let mut w_second = DVector::zeros(n_ions);
        for mode in 0..n_ions {
            let den = radial.frequencies[mode] - lambda * linear.laser_freq;
            let pair = eta1[mode] * eta2[mode];
            match variant {
                ThreeSpinVariant::Eq6Literal => {
                    w_first[mode] = pair * pair / den;
                    w_second[mode] = 1.0 / den;
                }
                ThreeSpinVariant::Eq6Corrected => {
                    w_first[mode] = pair / den;
                    w_second[mode] = pair / den;
                }
            }
        }
        let first = m * DMatrix::from_diagonal(&w_first) * m.transpose();
        let second = m * DMatrix::from_diagonal(&w_second) * m.transpose();
        pairs.push((first, second));
    }
    let kernel = |j: usize, k: usize, l: usize| -> f64 {
        pairs.iter().map(|(a, b)| a[(j, k)] * b[(j, l)]).sum()
    };

    let mut out = Vec::new();
    for j in 0..n_ions {
        for k in 0..j {
            for l in 0..k {
                let sum = kernel(j, k, l)
                    + kernel(j, l, k)
                    + kernel(k, j, l)
                    + kernel(k, l, j)
                    + kernel(l, j, k)
                    + kernel(l, k, j);
                let value = prefactor * sum * KHZ_PER_MHZ;
                if value != 0.0 {
                    out.push(TripleCoupling { j, k, l, value });
                }
            }
        }
    }
    Ok(out)
}

fn resonance_of(drive: &DriveConfig, spectrum: &ModeSpectrum) -> Error {
    match detunings(drive, spectrum) {
        Err(Error::Resonance { axis, mode, .. }) => Error::Resonance { axis, mode, drive: 0 },
        Err(e) => e,
        Ok(_) => Error::InvalidInput("unexpected resonance".into()),
    }
}

/// Outcome of tuning the axial drive intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    /// Tuned axial Rabi frequency Ω_L3 (rad/µs).
    pub rabi_freq: f64,
    /// Total 2-spin matrix after screening (kHz).
    #[serde(with = "rows")]
    pub residual: DMatrix<f64>,
    /// Mean nearest-neighbour entry of `residual` (kHz).
    pub mean_nn: f64,
    /// Largest |J_jk| over pairs with |j − k| ≥ 2 (kHz).
    pub max_long_range: f64,
}

/// Tune the axial drive so that the mean nearest-neighbour 2-spin coupling equals `target_nn` (kHz).
///
/// The axial contribution scales exactly as Ω_L3², so the intensity follows
/// from a single linear solve.
pub fn screen_axial(
    j2_radial: &DMatrix<f64>,
    chain: &ChainConfig,
    axial: &ModeSpectrum,
    template: &DriveConfig,
    target_nn: f64,
) -> Result<ScreeningResult> {
    if template.axis != Axis::Z || axial.axis != Axis::Z {
        return Err(Error::InvalidConfiguration("screening drive must act on the z axis".into()));
    }
    if !template.phase_uniform {
        return Err(Error::InvalidConfiguration(
            "screening drive requires phase_uniform = true".into(),
        ));
    }
    let det = detunings(template, axial)?;
    if placement(&det) != Placement::Red {
        return Err(Error::InvalidConfiguration(
            "screening drive must be red-detuned below every axial mode".into(),
        ));
    }
    let unit_drive = template.clone().with_rabi(1.0);
    let mut unit = axis_exchange(chain, axial, &unit_drive, 0)? * KHZ_PER_MHZ;
    unit.fill_diagonal(0.0);

    let radial_nn = mean_nearest_neighbour(j2_radial);
    let unit_nn = mean_nearest_neighbour(&unit);
    if unit_nn == 0.0 {
        return Err(Error::InfeasibleScreening(
            "axial drive does not couple nearest neighbours".into(),
        ));
    }
    let intensity = (target_nn - radial_nn) / unit_nn;
    if intensity < 0.0 {
        return Err(Error::InfeasibleScreening(format!(
            "target {target_nn} kHz needs a negative axial intensity (radial nearest-neighbour {radial_nn} kHz)"
        )));
    }
    let residual = j2_radial + &unit * intensity;
    let n = residual.nrows();
    let mut max_long_range: f64 = 0.0;
    for j in 0..n {
        for k in (j + 2)..n {
            max_long_range = max_long_range.max(residual[(j, k)].abs());
        }
    }
    Ok(ScreeningResult {
        rabi_freq: intensity.sqrt(),
        mean_nn: mean_nearest_neighbour(&residual),
        residual,
        max_long_range,
    })
}

/// Inputs of the leading-order magnitude estimates (frequencies in rad/µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormParams {
    pub beta_x: f64,
    pub omega_x: f64,
    pub delta_x: f64,
    pub force: f64,
    pub squeeze: f64,
    pub phase: f64,
    #[serde(default)]
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub j2_khz: f64,
    pub j3_khz: f64,
}

/// J₂ = β F² (1 + χ/4) / |δ| and J₃ = 3 β² ω² F² M cos φ / |δ|⁴, in kHz.
///
/// χ is an external input; the full mode-sum path never uses it.
pub fn closed_form_estimates(p: &ClosedFormParams) -> Result<ClosedForm> {
    if p.delta_x == 0.0 {
        return Err(Error::InvalidInput("detuning must be nonzero".into()));
    }
    let d = p.delta_x.abs();
    let j2 = p.beta_x * p.force * p.force / d * (1.0 + p.chi / 4.0);
    let j3 = 3.0 * (p.beta_x * p.omega_x).powi(2) * p.force.powi(2) * p.squeeze * p.phase.cos()
        / d.powi(4);
    Ok(ClosedForm {
        j2_khz: j2 * KHZ_PER_MHZ,
        j3_khz: j3 * KHZ_PER_MHZ,
    })
}

pub fn error_budget(force: f64, squeeze: f64, delta_x: f64) -> Result<ErrorBudget> {
    if delta_x == 0.0 {
        return Err(Error::InvalidInput("detuning must be nonzero".into()));
    }
    let eps_f = (force / delta_x).powi(2);
    let eps_m = (squeeze / delta_x).powi(2);
    let eps_mf = (squeeze * force / (delta_x * delta_x)).powi(2);
    Ok(ErrorBudget {
        eps_f,
        eps_m,
        eps_mf,
        total: eps_f.max(eps_m).max(eps_mf),
    })
}

/// Power-law fit |J(r)| ≈ A / r^p over separations 1..=N/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipolarFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Coefficient of determination of the log-log fit.
    pub r_squared: f64,
    pub warnings: Vec<String>,
}

/// Least-squares fit of log|J(r)| against log r, where J(r) is the mean over
/// all bonds at separation r of the nonzero entries.
pub fn dipolar_fit(j2: &DMatrix<f64>) -> Result<DipolarFit> {
    let n = j2.nrows();
    if n < 6 {
        return Err(Error::InvalidInput(format!("dipolar fit needs N >= 6, got {n}")));
    }
    let mut warnings = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in 1..=n / 2 {
        let entries: Vec<f64> = (0..n - r).map(|j| j2[(j + r, j)]).collect();
        let zeros = entries.iter().filter(|&&x| x == 0.0).count();
        if zeros > 0 {
            warnings.push(format!("separation {r}: {zeros} zero entries excluded"));
        }
        let nonzero: Vec<f64> = entries.into_iter().filter(|&x| x != 0.0).collect();
        if nonzero.is_empty() {
            continue;
        }
        let mean = nonzero.iter().sum::<f64>() / nonzero.len() as f64;
        if mean == 0.0 {
            warnings.push(format!("separation {r}: mean is zero, excluded"));
            continue;
        }
        xs.push((r as f64).ln());
        ys.push(mean.abs().ln());
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("fewer than two usable separations".into()));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DipolarFit {
        exponent: -slope,
        prefactor: intercept.exp(),
        r_squared,
        warnings,
    })
}

/// Dipolar coupling shapes J₂ Λ_jk and (J₃/3)(Λ_jk Λ_kl + Λ_kj Λ_jl + Λ_jl Λ_lk), Λ = 1/|j−k|³.
pub fn dipolar_couplings(n: usize, j2: f64, j3: f64) -> (DMatrix<f64>, Vec<TripleCoupling>) {
    let lam = |a: usize, b: usize| 1.0 / (a.abs_diff(b) as f64).powi(3);
    let mat = DMatrix::from_fn(n, n, |a, b| if a == b { 0.0 } else { j2 * lam(a, b) });
    let mut triples = Vec::new();
    if j3 != 0.0 {
        for j in 0..n {
            for k in 0..j {
                for l in 0..k {
                    let v = j3 / 3.0
                        * (lam(j, k) * lam(k, l) + lam(k, j) * lam(j, l) + lam(j, l) * lam(l, k));
                    triples.push(TripleCoupling { j, k, l, value: v });
                }
            }
        }
    }
    (mat, triples)
}

/// Everything the device layer reports for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDerivation {
    pub couplings: CouplingSet,
    #[serde(with = "rows")]
    pub radial_j2: DMatrix<f64>,
    #[serde(with = "rows")]
    pub axial_j2: DMatrix<f64>,
    pub screening: Option<ScreeningResult>,
    pub regime: RegimeReport,
    pub closed_form: Option<ClosedForm>,
    pub dipolar_fit: Option<DipolarFit>,
}

/// Bare intensities F = Ω_L1 η/2 and M = Ω_L2 η²/4 with η evaluated at the trap frequency.
pub fn bare_intensities(chain: &ChainConfig, linear: &DriveConfig, squeeze: Option<&DriveConfig>) -> (f64, f64) {
    let w = chain.trap_freq.x;
    let f = 0.5 * linear.rabi_freq * lamb_dicke(linear.wavevector, chain.mass_amu, w);
    let m = squeeze
        .map(|d| {
            let eta = lamb_dicke(d.wavevector, chain.mass_amu, w);
            0.25 * d.rabi_freq * eta * eta
        })
        .unwrap_or(0.0);
    (f, m)
}

/// Derive the full coupling set for a chain and its drives.
///
/// Radial drives contribute to J⁽²⁾ as given. With `screening_target` set,
/// the (single) axial drive is used as a template whose intensity is tuned;
/// otherwise axial drives contribute as given. J⁽³⁾ comes from the
/// first/second-sideband radial pair when both are present.
pub fn derive(
    chain: &ChainConfig,
    drives: &[DriveConfig],
    field_h: f64,
    variant: ThreeSpinVariant,
    screening_target: Option<f64>,
) -> Result<DeviceDerivation> {
    chain.validate()?;
    for d in drives {
        d.validate(chain)?;
    }
    let spectra = ChainSpectra::compute(chain)?;
    let radial: Vec<DriveConfig> = drives.iter().filter(|d| d.axis == Axis::X).cloned().collect();
    let axial: Vec<DriveConfig> = drives.iter().filter(|d| d.axis == Axis::Z).cloned().collect();
    if radial.is_empty() {
        return Err(Error::InvalidConfiguration("at least one radial drive is required".into()));
    }
    let radial_j2 = two_spin_couplings(chain, &spectra, &radial)?;

    let mut used = radial.clone();
    let (axial_j2, screening) = match screening_target {
        Some(target) => {
            let [template] = axial.as_slice() else {
                return Err(Error::InvalidConfiguration(
                    "screening needs exactly one axial drive as template".into(),
                ));
            };
            let result = screen_axial(&radial_j2, chain, &spectra.z, template, target)?;
            let axial_j2 = &result.residual - &radial_j2;
            if result.rabi_freq > 0.0 {
                used.push(template.clone().with_rabi(result.rabi_freq));
            }
            (axial_j2, Some(result))
        }
        None => {
            let axial_j2 = if axial.is_empty() {
                DMatrix::zeros(chain.n_ions, chain.n_ions)
            } else {
                two_spin_couplings(chain, &spectra, &axial)?
            };
            used.extend(axial.iter().cloned());
            (axial_j2, None)
        }
    };
    let j2 = &radial_j2 + &axial_j2;

    let linear = radial.iter().find(|d| d.sideband_order == 1);
    let squeeze = radial.iter().find(|d| d.sideband_order == 2);
    let j3 = match (linear, squeeze) {
        (Some(l), Some(s)) => three_spin_couplings(chain, &spectra.x, l, s, variant)?,
        _ => Vec::new(),
    };

    let (closed_form, error) = match linear {
        Some(l) => {
            let delta = l.bare_detuning(chain);
            let (f, m) = bare_intensities(chain, l, squeeze);
            let cf = closed_form_estimates(&ClosedFormParams {
                beta_x: chain.stiffness.x,
                omega_x: chain.trap_freq.x,
                delta_x: delta,
                force: f,
                squeeze: m,
                phase: l.phase,
                chi: 0.0,
            })?;
            (Some(cf), Some(error_budget(f, m, delta)?))
        }
        None => (None, None),
    };
    let fit = if chain.n_ions >= 6 { dipolar_fit(&j2).ok() } else { None };
    let regime = validate_regime(&used, &spectra);

    let mut couplings = CouplingSet::new(j2, j3, field_h)?;
    couplings.provenance = Some(Provenance {
        chain: chain.clone(),
        drives: used,
        variant,
    });
    couplings.error_budget = error;
    Ok(DeviceDerivation {
        couplings,
        radial_j2,
        axial_j2,
        screening,
        regime,
        closed_form,
        dipolar_fit: fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drives::{commensurate_wavevector, rabi_from_force, wavevector_for_lamb_dicke};
    use crate::phonons::PerAxis;
    use approx::assert_relative_eq;

    fn benchmark_params() -> ClosedFormParams {
        ClosedFormParams {
            beta_x: 0.05,
            omega_x: 10.0,
            delta_x: 1.25,
            force: 0.125,
            squeeze: 0.125,
            phase: 0.0,
            chi: 0.0,
        }
    }

    #[test]
    fn closed_form_benchmark() {
        let cf = closed_form_estimates(&benchmark_params()).unwrap();
        assert_relative_eq!(cf.j2_khz, 0.625, max_relative = 1e-12);
        assert_relative_eq!(cf.j3_khz, 0.600, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_scalings() {
        let base = closed_form_estimates(&benchmark_params()).unwrap();
        let doubled = closed_form_estimates(&ClosedFormParams { force: 0.25, ..benchmark_params() }).unwrap();
        assert_relative_eq!(doubled.j2_khz, 4.0 * base.j2_khz, max_relative = 1e-12);
        assert_relative_eq!(doubled.j3_khz, 4.0 * base.j3_khz, max_relative = 1e-12);
        let quarter = closed_form_estimates(&ClosedFormParams {
            phase: std::f64::consts::FRAC_PI_2,
            ..benchmark_params()
        })
        .unwrap();
        assert!(quarter.j3_khz.abs() < 1e-15);
        assert_eq!(quarter.j2_khz, base.j2_khz);
        assert!(closed_form_estimates(&ClosedFormParams { delta_x: 0.0, ..benchmark_params() }).is_err());
    }

    #[test]
    fn error_budget_values() {
        let e = error_budget(0.125, 0.125, 1.25).unwrap();
        assert_relative_eq!(e.total, 1e-2, max_relative = 1e-14);
        assert_relative_eq!(e.eps_mf, 1e-4, max_relative = 1e-12);
        let z = error_budget(0.0, 0.0, 1.25).unwrap();
        assert_eq!((z.eps_f, z.eps_m, z.eps_mf, z.total), (0.0, 0.0, 0.0, 0.0));
        assert_relative_eq!(error_budget(1.25, 0.0, 1.25).unwrap().total, 1.0);
    }

    #[test]
    fn dipolar_fit_exact_power_law() {
        let (j2, _) = dipolar_couplings(12, 1.0, 0.0);
        let fit = dipolar_fit(&j2).unwrap();
        assert!((fit.exponent - 3.0).abs() < 1e-6);
        assert_relative_eq!(fit.prefactor, 1.0, max_relative = 1e-9);
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn dipolar_fit_excludes_zeros() {
        let (mut j2, _) = dipolar_couplings(8, 1.0, 0.0);
        j2[(3, 1)] = 0.0;
        j2[(1, 3)] = 0.0;
        let fit = dipolar_fit(&j2).unwrap();
        assert_eq!(fit.warnings.len(), 1);
        assert!((fit.exponent - 3.0).abs() < 1e-6);
        assert!(dipolar_fit(&DMatrix::zeros(5, 5)).is_err());
    }

    fn radial_chain(n: usize, beta: f64) -> ChainConfig {
        ChainConfig::with_stiffness(n, 5.0, 40.0, 1, PerAxis { x: 10.0, y: 10.0, z: 2.0 }, PerAxis { x: beta, y: beta, z: 0.05 })
            .unwrap()
    }

    fn radial_drive(force: f64, delta: f64) -> DriveConfig {
        let eta = 0.2;
        let k = wavevector_for_lamb_dicke(eta, 40.0, 10.0);
        DriveConfig::from_bare_detuning(Axis::X, 1, rabi_from_force(force, eta), delta, 10.0, k)
    }

    #[test]
    fn two_spin_is_symmetric_with_zero_diagonal() {
        let c = radial_chain(6, 0.05);
        let s = ChainSpectra::compute(&c).unwrap();
        let j = two_spin_couplings(&c, &s, &[radial_drive(0.125, -1.25)]).unwrap();
        assert_eq!(j, j.transpose());
        for i in 0..6 {
            assert_eq!(j[(i, i)], 0.0);
        }
        // blue radial drive: antiferromagnetic nearest neighbours
        assert!(j[(1, 0)] > 0.0);
    }

    #[test]
    fn single_mode_gives_empty_matrix() {
        let m = DMatrix::from_element(1, 1, 1.0);
        let j = drive_exchange_matrix(&m, &[10.0], &[0.2], 1.0, 11.0).unwrap();
        assert_eq!(j.nrows(), 1);
    }

    #[test]
    fn resonant_drive_reports_mode() {
        let c = radial_chain(3, 0.05);
        let s = ChainSpectra::compute(&c).unwrap();
        let mut d = radial_drive(0.125, -1.25);
        d.laser_freq = s.x.frequencies[1];
        let err = two_spin_couplings(&c, &s, &[d.clone(), d]).unwrap_err();
        assert!(matches!(err, Error::Resonance { mode: 1, drive: 0, axis: 'x' }));
    }

    #[test]
    fn two_spin_intensity_scaling() {
        let c = radial_chain(5, 0.05);
        let s = ChainSpectra::compute(&c).unwrap();
        let d = radial_drive(0.125, -1.25);
        let a = two_spin_couplings(&c, &s, std::slice::from_ref(&d)).unwrap();
        let b = two_spin_couplings(&c, &s, &[d.clone().with_rabi(3.0 * d.rabi_freq)]).unwrap();
        assert!((b - a * 9.0).amax() < 1e-12);
    }

    #[test]
    fn zero_phase_cosine_kills_three_spin() {
        let c = radial_chain(5, 0.05);
        let s = ChainSpectra::compute(&c).unwrap();
        let l = radial_drive(0.125, -1.25).with_phase(std::f64::consts::FRAC_PI_2);
        let mut q = l.clone();
        q.sideband_order = 2;
        q.laser_freq = 2.0 * l.laser_freq;
        assert!(three_spin_couplings(&c, &s.x, &l, &q, ThreeSpinVariant::Eq6Literal).unwrap().is_empty());
    }

    #[test]
    fn mismatched_sidebands_rejected() {
        let c = radial_chain(4, 0.05);
        let s = ChainSpectra::compute(&c).unwrap();
        let l = radial_drive(0.125, -1.25);
        let mut q = l.clone();
        q.sideband_order = 2;
        q.laser_freq = 2.0 * l.laser_freq + 0.1;
        assert!(matches!(
            three_spin_couplings(&c, &s.x, &l, &q, ThreeSpinVariant::Eq6Literal),
            Err(Error::InvalidConfiguration(_))
        ));
        assert!(matches!(
            three_spin_couplings(&c, &s.x, &l, &l, ThreeSpinVariant::Eq6Literal),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn variant_parses() {
        assert_eq!("eq6-literal".parse::<ThreeSpinVariant>().unwrap(), ThreeSpinVariant::Eq6Literal);
        assert_eq!("eq6-corrected".parse::<ThreeSpinVariant>().unwrap(), ThreeSpinVariant::Eq6Corrected);
        assert!("eq7".parse::<ThreeSpinVariant>().is_err());
    }

    #[test]
    fn screening_no_op_when_target_is_radial() {
        let c = radial_chain(6, 0.05);
        let s = ChainSpectra::compute(&c).unwrap();
        let jr = two_spin_couplings(&c, &s, &[radial_drive(0.125, -1.25)]).unwrap();
        let k = commensurate_wavevector(1, c.spacing_um);
        let axial = DriveConfig::from_bare_detuning(Axis::Z, 1, 1.0, 0.5, 2.0, k).with_phase_uniform(true);
        let r = screen_axial(&jr, &c, &s.z, &axial, mean_nearest_neighbour(&jr)).unwrap();
        assert_eq!(r.rabi_freq, 0.0);
        assert_eq!(r.residual, jr);
    }

    #[test]
    fn screening_wrong_sign_infeasible() {
        let c = radial_chain(6, 0.05);
        let s = ChainSpectra::compute(&c).unwrap();
        let jr = two_spin_couplings(&c, &s, &[radial_drive(0.125, -1.25)]).unwrap();
        let k = commensurate_wavevector(1, c.spacing_um);
        let axial = DriveConfig::from_bare_detuning(Axis::Z, 1, 1.0, 0.5, 2.0, k).with_phase_uniform(true);
        let above = 2.0 * mean_nearest_neighbour(&jr);
        assert!(matches!(
            screen_axial(&jr, &c, &s.z, &axial, above),
            Err(Error::InfeasibleScreening(_))
        ));
        // blue axial placement violates the precondition
        let blue = DriveConfig::from_bare_detuning(Axis::Z, 1, 1.0, -0.5, 2.0, k).with_phase_uniform(true);
        assert!(matches!(
            screen_axial(&jr, &c, &s.z, &blue, 0.0),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn coupling_set_validation() {
        let j2 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let ok = CouplingSet::new(j2.clone(), vec![TripleCoupling { j: 2, k: 1, l: 0, value: 1.0 }], 0.5);
        assert!(ok.is_ok());
        let bad = CouplingSet::new(j2.clone(), vec![TripleCoupling { j: 3, k: 1, l: 0, value: 1.0 }], 0.5);
        assert!(matches!(bad, Err(Error::IndexOutOfRange(_))));
        let unsorted = CouplingSet::new(j2.clone(), vec![TripleCoupling { j: 0, k: 1, l: 2, value: 1.0 }], 0.5);
        assert!(unsorted.is_err());
        let mut asym = j2;
        asym[(0, 1)] = 2.0;
        assert!(CouplingSet::new(asym, vec![], 0.5).is_err());
    }

    #[test]
    fn coupling_set_json_round_trip() {
        let (j2, j3) = dipolar_couplings(4, 0.5, -0.3);
        let set = CouplingSet::new(j2, j3, 1.0).unwrap();
        let text = serde_json::to_string(&set).unwrap();
        let back: CouplingSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, set);
    }
}

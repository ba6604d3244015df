//! Adiabatic ramps of small spin systems.
//!
//! Couplings are in kHz and times in 1/kHz; the propagator over a step of
//! length `dt` is `exp(−i H dt)` with `H` taken at the step midpoint and
//! applied through a dense eigendecomposition.

use nalgebra::DVector;

use crate::linalg::{sym_eigen, SymEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::oracles::{dense_matrix, DENSE_MAX_SPINS};
use crate::spin_model::{spin_mask, SpinHamiltonian, SpinState};
use crate::{Error, Result};

/// Largest tolerated change of ‖ψ‖ in one step.
pub const NORM_DRIFT_PER_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampPoint {
    pub j2: f64,
    pub j3: f64,
    pub h: f64,
}

impl RampPoint {
    fn lerp(a: RampPoint, b: RampPoint, s: f64) -> RampPoint {
        RampPoint {
            j2: a.j2 + (b.j2 - a.j2) * s,
            j3: a.j3 + (b.j3 - a.j3) * s,
            h: a.h + (b.h - a.h) * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RampShape {
    Linear,
    /// Each coupling moves geometrically, `x(t) = x₀ (x₁/x₀)^{t/T}`.
    Exponential,
    /// Piecewise-linear table of (time, couplings) knots.
    Table { times: Vec<f64>, values: Vec<RampPoint> },
}

/// Interaction geometry of the ramped Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RampGeometry {
    /// Three ions, every pair coupled by J₂.
    PaulTrap,
    /// Open nearest-neighbour chain.
    Chain { n: usize },
}

impl RampGeometry {
    pub fn n_spins(&self) -> usize {
        match self {
            RampGeometry::PaulTrap => 3,
            RampGeometry::Chain { n } => *n,
        }
    }

    pub fn hamiltonian(&self, p: RampPoint) -> Result<SpinHamiltonian> {
        match self {
            RampGeometry::PaulTrap => paul_trap_hamiltonian(p.j2, p.j3, p.h),
            RampGeometry::Chain { n } => SpinHamiltonian::nearest_neighbour_chain(*n, p.j2, p.j3, p.h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub duration: f64,
    pub steps: usize,
    pub start: RampPoint,
    pub end: RampPoint,
    pub shape: RampShape,
    pub geometry: RampGeometry,
}

impl RampSchedule {
    pub fn linear(geometry: RampGeometry, start: RampPoint, end: RampPoint, duration: f64, steps: usize) -> Result<Self> {
        let s = RampSchedule { duration, steps, start, end, shape: RampShape::Linear, geometry };
        s.validate()?;
        Ok(s)
    }

    pub fn exponential(geometry: RampGeometry, start: RampPoint, end: RampPoint, duration: f64, steps: usize) -> Result<Self> {
        let s = RampSchedule { duration, steps, start, end, shape: RampShape::Exponential, geometry };
        s.validate()?;
        Ok(s)
    }

    /// Schedule from knots; the first knot must sit at t = 0 and the last at the duration.
    pub fn table(geometry: RampGeometry, times: Vec<f64>, values: Vec<RampPoint>, steps: usize) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidConfiguration(format!(
                "ramp table needs matching non-empty times and values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        let s = RampSchedule {
            duration: *times.last().unwrap(),
            steps,
            start: values[0],
            end: *values.last().unwrap(),
            shape: RampShape::Table { times, values },
            geometry,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "ramp duration {} must be finite and non-negative",
                self.duration
            )));
        }
        if self.steps == 0 && self.duration > 0.0 {
            return Err(Error::InvalidConfiguration("a ramp of positive duration needs steps >= 1".into()));
        }
        if self.geometry.n_spins() == 0 || self.geometry.n_spins() > DENSE_MAX_SPINS {
            return Err(Error::TooLarge(format!(
                "ramps are limited to 1..={DENSE_MAX_SPINS} spins, got {}",
                self.geometry.n_spins()
            )));
        }
        match &self.shape {
            RampShape::Linear => {}
            RampShape::Exponential => {
                for (name, a, b) in [
                    ("j2", self.start.j2, self.end.j2),
                    ("j3", self.start.j3, self.end.j3),
                    ("h", self.start.h, self.end.h),
                ] {
                    if a != b && !(a * b > 0.0) {
                        return Err(Error::InvalidConfiguration(format!(
                            "exponential ramp of {name} from {a} to {b} needs non-zero endpoints of equal sign"
                        )));
                    }
                }
            }
            RampShape::Table { times, values } => {
                if times[0] != 0.0 {
                    return Err(Error::InvalidConfiguration("ramp table must start at t = 0".into()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidConfiguration("ramp table times must increase strictly".into()));
                }
                if *times.last().unwrap() != self.duration || values[0] != self.start || *values.last().unwrap() != self.end {
                    return Err(Error::InvalidConfiguration("ramp table endpoints disagree with the schedule".into()));
                }
            }
        }
        let all_finite = |p: &RampPoint| p.j2.is_finite() && p.j3.is_finite() && p.h.is_finite();
        if !all_finite(&self.start) || !all_finite(&self.end) {
            return Err(Error::InvalidConfiguration("ramp couplings must be finite".into()));
        }
        Ok(())
    }

    /// Time grid `t_i = i T / steps`, `i = 0..=steps`.
    pub fn times(&self) -> Vec<f64> {
        if self.steps == 0 {
            return vec![0.0];
        }
        (0..=self.steps)
            .map(|i| self.duration * i as f64 / self.steps as f64)
            .collect()
    }

    /// Couplings at time `t`, clamped to the ramp interval.
    pub fn at(&self, t: f64) -> RampPoint {
        if self.duration == 0.0 {
            return self.end;
        }
        let t = t.clamp(0.0, self.duration);
        let s = t / self.duration;
        match &self.shape {
            RampShape::Linear => RampPoint::lerp(self.start, self.end, s),
            RampShape::Exponential => {
                let geo = |a: f64, b: f64| if a == b { a } else { a * (b / a).powf(s) };
                RampPoint {
                    j2: geo(self.start.j2, self.end.j2),
                    j3: geo(self.start.j3, self.end.j3),
                    h: geo(self.start.h, self.end.h),
                }
            }
            RampShape::Table { times, values } => {
                let i = times.partition_point(|&x| x <= t);
                if i == 0 {
                    values[0]
                } else if i >= times.len() {
                    *values.last().unwrap()
                } else {
                    let f = (t - times[i - 1]) / (times[i] - times[i - 1]);
                    RampPoint::lerp(values[i - 1], values[i], f)
                }
            }
        }
    }
}

/// `J₂(σ₁σ₂ + σ₂σ₃ + σ₃σ₁) + J₃σ₁σ₂σ₃ − h(σ^x₁ + σ^x₂ + σ^x₃)`.
pub fn paul_trap_hamiltonian(j2: f64, j3: f64, h: f64) -> Result<SpinHamiltonian> {
    SpinHamiltonian::new(3, vec![(1, 0, j2), (2, 1, j2), (2, 0, j2)], vec![(2, 1, 0, j3)], h)
}

/// Basis indices of the four period-3 patterns with every consecutive
/// triple product equal to +1 (the ferrimagnetic manifold).
pub fn ferrimagnetic_patterns(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(4);
    for (s0, s1) in [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)] {
        let mut s = vec![s0, s1];
        while s.len() < n {
            let m = s.len();
            s.push(s[m - 1] * s[m - 2]);
        }
        s.truncate(n);
        let index = s
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 0)
            .fold(0, |acc, (j, _)| acc | spin_mask(n, j));
        out.push(index);
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FidelityTarget {
    /// (|↑…↑⟩ + e^{iθ}|↓…↓⟩)/√2, maximized over θ.
    Ghz,
    /// Equal-weight superposition of the single-↑ states.
    W,
    /// Total weight on the four ferrimagnetic patterns.
    FerrimagneticManifold,
    Custom { state: SpinState },
}

impl FidelityTarget {
    pub fn label(&self) -> &'static str {
        match self {
            FidelityTarget::Ghz => "ghz",
            FidelityTarget::W => "w",
            FidelityTarget::FerrimagneticManifold => "ferri_manifold",
            FidelityTarget::Custom { .. } => "custom",
        }
    }
}

/// Fidelity of `state` with a target family, in [0, 1].
pub fn fidelity(state: &SpinState, target: &FidelityTarget) -> Result<f64> {
    let n = state.n_spins();
    let amps = &state.amplitudes;
    let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let f = match target {
        FidelityTarget::Ghz => {
            let (a, b) = (amps[0].norm(), amps[amps.len() - 1].norm());
            (a + b).powi(2) / 2.0
        }
        FidelityTarget::W => state.overlap(&SpinState::w(n))?.norm_sqr(),
        FidelityTarget::FerrimagneticManifold => ferrimagnetic_patterns(n)
            .into_iter()
            .map(|b| amps[b].norm_sqr())
            .sum(),
        FidelityTarget::Custom { state: target } => {
            let t2: f64 = target.amplitudes.iter().map(|a| a.norm_sqr()).sum();
            target.overlap(state)?.norm_sqr() / t2
        }
    };
    Ok((f / norm2).clamp(0.0, 1.0))
}

/// One row of the ramp time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSample {
    pub time: f64,
    pub couplings: RampPoint,
    /// ⟨ψ|H(t)|ψ⟩.
    pub energy: f64,
    /// Instantaneous ground energy.
    pub ground_energy: f64,
    /// Instantaneous E₁ − E₀.
    pub gap: f64,
    /// Overlap with the instantaneous ground space.
    pub ground_fidelity: f64,
    pub fidelities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampResult {
    pub final_state: SpinState,
    pub samples: Vec<RampSample>,
}

/// Indices of the ground cluster, E₀ and E₁ − E₀ (zero when degenerate).
fn ground_space(eig: &SymEigen) -> (Vec<usize>, f64, f64) {
    let e0 = eig.values[0];
    let tol = crate::spin_model::degeneracy_tolerance(e0);
    let ground = (0..eig.values.len()).take_while(|&i| eig.values[i] - e0 < tol).collect();
    let gap = eig.values.get(1).map_or(0.0, |e| e - e0);
    (ground, e0, gap.max(0.0))
}

fn sample(
    t: f64,
    p: RampPoint,
    state: &SpinState,
    h: &SpinHamiltonian,
    targets: &[FidelityTarget],
) -> Result<RampSample> {
    let eig = sym_eigen(&dense_matrix(h)?);
    let (ground, e0, gap) = ground_space(&eig);
    let ground_fidelity = ground
        .iter()
        .map(|&i| {
            let v = eig.vectors.column(i);
            state
                .amplitudes
                .iter()
                .zip(v.iter())
                .map(|(a, &x)| a * x)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum::<f64>()
        .min(1.0);
    Ok(RampSample {
        time: t,
        couplings: p,
        energy: h.expectation(state),
        ground_energy: e0,
        gap,
        ground_fidelity,
        fidelities: targets.iter().map(|tg| fidelity(state, tg)).collect::<Result<_>>()?,
    })
}

/// Propagates `initial` through the schedule, recording a sample every
/// `sample_every` steps and always at both ends.
pub fn evolve(
    initial: &SpinState,
    schedule: &RampSchedule,
    targets: &[FidelityTarget],
    sample_every: usize,
) -> Result<RampResult> {
    schedule.validate()?;
    let n = schedule.geometry.n_spins();
    if initial.amplitudes.len() != 1 << n {
        return Err(Error::InvalidInput(format!(
            "initial state has {} amplitudes, the ramp acts on {n} spins",
            initial.amplitudes.len()
        )));
    }
    let every = sample_every.max(1);
    let times = schedule.times();
    let mut psi = initial.clone();
    let mut samples = Vec::new();
    let h0 = schedule.geometry.hamiltonian(schedule.at(0.0))?;
    samples.push(sample(0.0, schedule.at(0.0), &psi, &h0, targets)?);

    for (i, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        let mid = schedule.at(0.5 * (w[0] + w[1]));
        let h = schedule.geometry.hamiltonian(mid)?;
        let eig = sym_eigen(&dense_matrix(&h)?);
        let v = &eig.vectors;
        let before = psi.norm();
        // ψ ← V e^{−iΛdt} Vᵀ ψ
        let coeffs: Vec<Complex64> = (0..v.ncols())
            .map(|c| {
                let proj: Complex64 = v.column(c).iter().zip(&psi.amplitudes).map(|(&x, a)| a * x).sum();
                proj * Complex64::from_polar(1.0, -eig.values[c] * dt)
            })
            .collect();
        let coeff_re = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|c| c.re));
        let coeff_im = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|c| c.im));
        let re = v * coeff_re;
        let im = v * coeff_im;
        for (k, a) in psi.amplitudes.iter_mut().enumerate() {
            *a = Complex64::new(re[k], im[k]);
        }
        let drift = (psi.norm() - before).abs();
        if drift > NORM_DRIFT_PER_STEP {
            return Err(Error::StepTooCoarse { step: i, drift });
        }
        let step = i + 1;
        if step % every == 0 || step == schedule.steps {
            let p = schedule.at(w[1]);
            let hs = schedule.geometry.hamiltonian(p)?;
            samples.push(sample(w[1], p, &psi, &hs, targets)?);
        }
    }
    Ok(RampResult { final_state: psi, samples })
}

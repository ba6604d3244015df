//! Competing-interaction transverse-field Ising model on the σ^z product basis.
//!
//! `H = Σ_{j>k} J_jk s_j s_k + Σ_{j>k>l} J_jkl s_j s_k s_l − h Σ_j σ^x_j`
//!
//! Basis index `b` over `2^N` states: spin `j` is bit `N − 1 − j` of `b`, a
//! clear bit is ↑ (s = +1) and a set bit is ↓ (s = −1). Index 0 is ↑↑…↑ and
//! kets read left to right in spin order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::couplings::CouplingSet;
use crate::eigensolver::{LanczosOptions, LanczosSolver, LinearOperator};
use crate::{Error, Result};

pub const MAX_SPINS: usize = 24;
/// Memory granted to Krylov bases, bytes.
const KRYLOV_MEMORY_BUDGET: usize = 1 << 31;

#[inline]
pub fn spin_mask(n: usize, j: usize) -> usize {
    1 << (n - 1 - j)
}

/// s_j ∈ {+1, −1} of basis state `b`.
#[inline]
pub fn spin_value(n: usize, b: usize, j: usize) -> f64 {
    if b & spin_mask(n, j) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Which couplings of a [`CouplingSet`] enter the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRange {
    #[default]
    Full,
    /// Nearest-neighbour bonds and consecutive triples only.
    NearestNeighbour,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinHamiltonian {
    n: usize,
    bonds: Vec<(usize, usize, f64)>,
    triples: Vec<(usize, usize, usize, f64)>,
    field_h: f64,
    diagonal: Vec<f64>,
}

impl SpinHamiltonian {
    /// Hamiltonian from explicit bond and triple lists. Repeated entries add up.
    pub fn new(
        n: usize,
        bonds: Vec<(usize, usize, f64)>,
        triples: Vec<(usize, usize, usize, f64)>,
        field_h: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("need at least one spin".into()));
        }
        if n > MAX_SPINS {
            return Err(Error::TooLarge(format!(
                "{n} spins exceeds the cap of {MAX_SPINS}"
            )));
        }
        for &(j, k, _) in &bonds {
            if j >= n || k >= n || j == k {
                return Err(Error::IndexOutOfRange(format!(
                    "bond ({j}, {k}) invalid for {n} spins"
                )));
            }
        }
        for &(j, k, l, _) in &triples {
            if j >= n || k >= n || l >= n || j == k || k == l || j == l {
                return Err(Error::IndexOutOfRange(format!(
                    "triple ({j}, {k}, {l}) invalid for {n} spins"
                )));
            }
        }
        if !field_h.is_finite() {
            return Err(Error::InvalidInput("field must be finite".into()));
        }
        let bonds: Vec<_> = bonds.into_iter().filter(|b| b.2 != 0.0).collect();
        let triples: Vec<_> = triples.into_iter().filter(|t| t.3 != 0.0).collect();
        let diagonal = compute_diagonal(n, &bonds, &triples);
        Ok(SpinHamiltonian {
            n,
            bonds,
            triples,
            field_h,
            diagonal,
        })
    }

    /// Uniform open chain `J₂ Σ s_j s_{j+1} + J₃ Σ s_j s_{j+1} s_{j+2} − h Σ σ^x_j`.
    pub fn nearest_neighbour_chain(n: usize, j2: f64, j3: f64, field_h: f64) -> Result<Self> {
        let bonds = (0..n.saturating_sub(1)).map(|j| (j + 1, j, j2)).collect();
        let triples = (0..n.saturating_sub(2)).map(|j| (j + 2, j + 1, j, j3)).collect();
        Self::new(n, bonds, triples, field_h)
    }

    pub fn from_couplings(couplings: &CouplingSet, n_spins: usize, range: CouplingRange) -> Result<Self> {
        if couplings.j2.nrows() > n_spins {
            // entries beyond n_spins must be zero
            for j in n_spins..couplings.j2.nrows() {
                if couplings.j2.row(j).iter().any(|&v| v != 0.0) {
                    return Err(Error::IndexOutOfRange(format!(
                        "j2 couples spin {j} but the model has {n_spins} spins"
                    )));
                }
            }
        }
        let mut bonds = Vec::new();
        for j in 0..couplings.j2.nrows() {
            for k in 0..j {
                let keep = match range {
                    CouplingRange::Full => true,
                    CouplingRange::NearestNeighbour => j - k == 1,
                };
                if keep && couplings.j2[(j, k)] != 0.0 {
                    bonds.push((j, k, couplings.j2[(j, k)]));
                }
            }
        }
        let triples = couplings
            .j3
            .iter()
            .filter(|t| match range {
                CouplingRange::Full => true,
                CouplingRange::NearestNeighbour => t.j == t.k + 1 && t.k == t.l + 1,
            })
            .map(|t| (t.j, t.k, t.l, t.value))
            .collect();
        Self::new(n_spins, bonds, triples, couplings.field_h)
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn field(&self) -> f64 {
        self.field_h
    }

    pub fn bonds(&self) -> &[(usize, usize, f64)] {
        &self.bonds
    }

    pub fn triples(&self) -> &[(usize, usize, usize, f64)] {
        &self.triples
    }

    /// Cached σ^z-diagonal part.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Upper bound on the operator norm.
    pub fn norm_estimate(&self) -> f64 {
        let d = self.diagonal.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        d + self.n as f64 * self.field_h.abs()
    }

    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (b, yb) in y.iter_mut().enumerate() {
            *yb = x[b] * self.diagonal[b];
        }
        if self.field_h != 0.0 {
            for j in 0..self.n {
                flip_accumulate(-self.field_h, spin_mask(self.n, j), x, y);
            }
        }
    }

    /// ⟨ψ|H|ψ⟩ for a normalized state.
    pub fn expectation(&self, state: &SpinState) -> f64 {
        let mut hv = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply_complex(&state.amplitudes, &mut hv);
        state
            .amplitudes
            .iter()
            .zip(&hv)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    fn lanczos_options(&self, seed: u64) -> LanczosOptions {
        let by_memory = KRYLOV_MEMORY_BUDGET / (8 * self.dim());
        LanczosOptions {
            norm_estimate: self.norm_estimate().max(1e-300),
            max_krylov: by_memory.clamp(8, 160),
            seed,
            ..Default::default()
        }
    }
}

fn compute_diagonal(n: usize, bonds: &[(usize, usize, f64)], triples: &[(usize, usize, usize, f64)]) -> Vec<f64> {
    let mut diag = vec![0.0; 1 << n];
    for &(j, k, v) in bonds {
        let m = spin_mask(n, j) | spin_mask(n, k);
        for (b, d) in diag.iter_mut().enumerate() {
            // parity of the two bits decides the sign
            *d += if (b & m).count_ones().is_multiple_of(2) { v } else { -v };
        }
    }
    for &(j, k, l, v) in triples {
        let m = spin_mask(n, j) | spin_mask(n, k) | spin_mask(n, l);
        for (b, d) in diag.iter_mut().enumerate() {
            *d += if (b & m).count_ones().is_multiple_of(2) { v } else { -v };
        }
    }
    diag
}

impl LinearOperator for SpinHamiltonian {
    fn dim(&self) -> usize {
        1 << self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yb, xb), d) in y.iter_mut().zip(x).zip(&self.diagonal) {
            *yb = d * xb;
        }
        if self.field_h != 0.0 {
            for j in 0..self.n {
                flip_accumulate(-self.field_h, spin_mask(self.n, j), x, y);
            }
        }
    }
}

/// y[b] += c·x[b ^ m] for a single-bit mask `m`, walking the paired blocks
/// of length `m` so the inner loops are contiguous.
fn flip_accumulate<T>(c: f64, m: usize, x: &[T], y: &mut [T])
where
    T: Copy + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
{
    for (xb, yb) in x.chunks_exact(2 * m).zip(y.chunks_exact_mut(2 * m)) {
        let (x_lo, x_hi) = xb.split_at(m);
        let (y_lo, y_hi) = yb.split_at_mut(m);
        for (yv, &xv) in y_lo.iter_mut().zip(x_hi) {
            *yv += xv * c;
        }
        for (yv, &xv) in y_hi.iter_mut().zip(x_lo) {
            *yv += xv * c;
        }
    }
}

/// Amplitudes over the 2^N σ^z product basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub amplitudes: Vec<Complex64>,
}

impl SpinState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "state length {len} is not 2^N with N >= 1"
            )));
        }
        Ok(SpinState { amplitudes })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        SpinState { amplitudes }
    }

    /// Product state from a ket label such as `"↑↓↓"` or `"udd"`.
    pub fn from_ket(label: &str) -> Result<Self> {
        let spins: Vec<bool> = label
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '↑' | 'u' | 'U' | '0' => Ok(false),
                '↓' | 'd' | 'D' | '1' => Ok(true),
                other => Err(Error::InvalidInput(format!("unknown spin symbol {other:?}"))),
            })
            .collect::<Result<_>>()?;
        let n = spins.len();
        if n == 0 || n > MAX_SPINS {
            return Err(Error::InvalidInput(format!("ket of {n} spins is out of range")));
        }
        let index = spins
            .iter()
            .enumerate()
            .filter(|(_, &down)| down)
            .fold(0, |acc, (j, _)| acc | spin_mask(n, j));
        Ok(Self::basis(n, index))
    }

    /// |→→…→⟩, ground state of −h Σ σ^x for h > 0.
    pub fn x_polarized(n: usize) -> Self {
        let a = 1.0 / ((1usize << n) as f64).sqrt();
        SpinState {
            amplitudes: vec![Complex64::new(a, 0.0); 1 << n],
        }
    }

    /// (|↑…↑⟩ + |↓…↓⟩)/√2.
    pub fn ghz(n: usize) -> Self {
        let mut s = Self::basis(n, 0);
        let a = std::f64::consts::FRAC_1_SQRT_2;
        s.amplitudes[0] = Complex64::new(a, 0.0);
        s.amplitudes[(1 << n) - 1] = Complex64::new(a, 0.0);
        s
    }

    /// Equal superposition of the N states with exactly one spin ↑.
    pub fn w(n: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        let a = 1.0 / (n as f64).sqrt();
        let all_down = (1 << n) - 1;
        for j in 0..n {
            amplitudes[all_down ^ spin_mask(n, j)] = Complex64::new(a, 0.0);
        }
        SpinState { amplitudes }
    }

    pub fn n_spins(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        self
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &SpinState) -> Result<Complex64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {}",
                self.amplitudes.len(),
                other.amplitudes.len()
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// One eigenpair of the spin Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub energy: f64,
    pub state: SpinState,
    pub residual: f64,
}

/// Lowest eigenpairs with their degeneracy structure.
#[derive(Debug, Clone, PartialEq)]
pub struct LowSpectrum {
    pub levels: Vec<Level>,
    /// Number of levels within the degeneracy tolerance of the ground energy.
    pub ground_degeneracy: usize,
    /// Cluster index per level; equal indices are degenerate.
    pub clusters: Vec<usize>,
    pub tolerance: f64,
}

impl LowSpectrum {
    pub fn ground_energy(&self) -> f64 {
        self.levels[0].energy
    }

    pub fn ground_states(&self) -> Vec<SpinState> {
        self.levels[..self.ground_degeneracy]
            .iter()
            .map(|l| l.state.clone())
            .collect()
    }

    /// Energy of the first level outside the ground cluster minus E₀, if computed.
    pub fn gap(&self) -> Option<f64> {
        self.levels
            .get(self.ground_degeneracy)
            .map(|l| (l.energy - self.levels[0].energy).max(0.0))
    }
}

/// States with E − E₀ below this are treated as degenerate.
pub fn degeneracy_tolerance(e0: f64) -> f64 {
    1e-8 * e0.abs().max(1.0)
}

fn cluster(levels: Vec<Level>) -> LowSpectrum {
    let e0 = levels[0].energy;
    let tol = degeneracy_tolerance(e0);
    let mut clusters = Vec::with_capacity(levels.len());
    let mut id = 0;
    let mut anchor = e0;
    for l in &levels {
        if l.energy - anchor >= tol {
            id += 1;
            anchor = l.energy;
        }
        clusters.push(id);
    }
    let ground_degeneracy = clusters.iter().take_while(|&&c| c == 0).count();
    LowSpectrum {
        levels,
        ground_degeneracy,
        clusters,
        tolerance: tol,
    }
}

fn to_levels(pairs: Vec<crate::eigensolver::Eigenpair>) -> Result<Vec<Level>> {
    pairs
        .into_iter()
        .map(|p| {
            Ok(Level {
                energy: p.value,
                residual: p.residual,
                state: SpinState::from_real(&p.vector)?,
            })
        })
        .collect()
}

/// The `k` lowest eigenpairs by restarted Lanczos.
pub fn ground_state(h: &SpinHamiltonian, k: usize) -> Result<LowSpectrum> {
    ground_state_seeded(h, k, 0x5eed)
}

pub fn ground_state_seeded(h: &SpinHamiltonian, k: usize, seed: u64) -> Result<LowSpectrum> {
    if k == 0 {
        return Err(Error::InvalidInput("need k >= 1 eigenpairs".into()));
    }
    let opts = h.lanczos_options(seed);
    // one level beyond k, so a near-degenerate partner of the k-th level is
    // resolved rather than mixed into it
    let mut pairs = LanczosSolver::new(h, opts).extend_to(k + 1)?;
    pairs.truncate(k);
    Ok(cluster(to_levels(pairs)?))
}

/// The whole ground cluster plus the first level above it (when one exists).
pub fn ground_cluster(h: &SpinHamiltonian, seed: u64) -> Result<LowSpectrum> {
    ground_cluster_with(h, seed, usize::MAX, None)
}

/// [`ground_cluster`] with the Krylov dimension capped at `max_krylov` and an
/// optional relative residual tolerance.
pub fn ground_cluster_with(
    h: &SpinHamiltonian,
    seed: u64,
    max_krylov: usize,
    tolerance: Option<f64>,
) -> Result<LowSpectrum> {
    let mut opts = h.lanczos_options(seed);
    opts.max_krylov = opts.max_krylov.min(max_krylov).max(8);
    if let Some(t) = tolerance {
        opts.tolerance = t;
    }
    let mut solver = LanczosSolver::new(h, opts);
    let dim = h.dim();
    let mut k = 2.min(dim);
    loop {
        let spectrum = cluster(to_levels(solver.extend_to(k)?)?);
        if spectrum.ground_degeneracy < spectrum.levels.len() || k >= dim {
            return Ok(spectrum);
        }
        k = (2 * k).min(dim);
    }
}

/// (E₁ − E₀, ground degeneracy). E₁ is the next level counted with multiplicity,
/// so a degenerate ground state has gap 0.
pub fn gap(h: &SpinHamiltonian) -> Result<(f64, usize)> {
    let s = ground_cluster(h, 0x5eed)?;
    let g = if s.levels.len() > 1 {
        (s.levels[1].energy - s.levels[0].energy).max(0.0)
    } else {
        0.0
    };
    let g = if s.ground_degeneracy > 1 { 0.0 } else { g };
    Ok((g, s.ground_degeneracy))
}

/// −1/(N−1) Σ_j ⟨s_j s_{j+1}⟩ for a σ^z probability distribution.
pub fn order_af_probabilities(n: usize, probs: &[f64]) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for (b, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        // adjacent pairs with equal spins contribute +1
        let unequal = ((b ^ (b >> 1)) & ((1 << (n - 1)) - 1)).count_ones() as f64;
        let corr = (n - 1) as f64 - 2.0 * unequal;
        total += p * corr;
    }
    -total / (n - 1) as f64
}

/// 1/(N−2) Σ_j ⟨s_j s_{j+1} s_{j+2}⟩ for a σ^z probability distribution.
pub fn order_f_probabilities(n: usize, probs: &[f64]) -> f64 {
    if n < 3 {
        return 0.0;
    }
    let mut total = 0.0;
    for (b, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let odd_windows = ((b ^ (b >> 1) ^ (b >> 2)) & ((1 << (n - 2)) - 1)).count_ones() as f64;
        total += p * ((n - 2) as f64 - 2.0 * odd_windows);
    }
    total / (n - 2) as f64
}

fn average_over(states: &[SpinState], f: impl Fn(usize, &[f64]) -> f64) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    states
        .iter()
        .map(|s| {
            let p = s.probabilities();
            let norm: f64 = p.iter().sum();
            f(s.n_spins(), &p) / norm
        })
        .sum::<f64>()
        / states.len() as f64
}

/// Antiferromagnetic order parameter averaged over a (degenerate) set of states.
pub fn order_af(states: &[SpinState]) -> f64 {
    average_over(states, order_af_probabilities)
}

/// Ferrimagnetic (three-site) order parameter averaged over a set of states.
pub fn order_f(states: &[SpinState]) -> f64 {
    average_over(states, order_f_probabilities)
}

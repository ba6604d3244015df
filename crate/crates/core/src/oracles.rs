//! Independent reference solutions used to cross-check the iterative solver.
//!
//! Nothing here reuses the cached diagonal or the matrix-free product of
//! [`SpinHamiltonian`]; only its bond and triple lists are read.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::couplings::TripleCoupling;
use crate::spin_model::SpinHamiltonian;
use crate::{Error, Result};

pub const DENSE_MAX_SPINS: usize = 12;

fn spin(n: usize, b: usize, j: usize) -> f64 {
    if (b >> (n - 1 - j)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Full 2^N × 2^N matrix assembled entry by entry.
pub fn dense_matrix(h: &SpinHamiltonian) -> Result<DMatrix<f64>> {
    let n = h.n_spins();
    if n > DENSE_MAX_SPINS {
        return Err(Error::TooLarge(format!(
            "dense diagonalization is limited to {DENSE_MAX_SPINS} spins, got {n}"
        )));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        let mut e = 0.0;
        for &(j, k, v) in h.bonds() {
            e += v * spin(n, b, j) * spin(n, b, k);
        }
        for &(j, k, l, v) in h.triples() {
            e += v * spin(n, b, j) * spin(n, b, k) * spin(n, b, l);
        }
        m[(b, b)] = e;
        for j in 0..n {
            let flipped = b ^ (1 << (n - 1 - j));
            m[(flipped, b)] -= h.field();
        }
    }
    Ok(m)
}

/// All eigenvalues, ascending.
pub fn dense_spectrum(h: &SpinHamiltonian) -> Result<Vec<f64>> {
    let m = dense_matrix(h)?;
    let mut values: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Ground energy of the open chain `J Σ σ^z_j σ^z_{j+1} − h Σ σ^x_j` from its
/// quadratic-fermion form.
///
/// After a Jordan–Wigner transformation along the chain the Hamiltonian is
/// `Σ c†Ac + ½ Σ (c†Bc† + h.c.) + const`, diagonalized through the 2N × 2N
/// Bogoliubov–de Gennes matrix `[[A, B], [−B, −A]]`. Its eigenvalues come in
/// ± pairs and the ground energy collects the negative half.
pub fn tfi_free_fermion(n: usize, j: f64, h: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // σ^x = 1 − 2c†c and σ^zσ^z bonds become hopping plus pairing
    let g = h;
    let k = -j;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 2.0 * g;
        if i + 1 < n {
            a[(i, i + 1)] = -k;
            a[(i + 1, i)] = -k;
            b[(i, i + 1)] = -k;
            b[(i + 1, i)] = k;
        }
    }
    let mut bdg = DMatrix::zeros(2 * n, 2 * n);
    bdg.view_mut((0, 0), (n, n)).copy_from(&a);
    bdg.view_mut((0, n), (n, n)).copy_from(&b);
    bdg.view_mut((n, 0), (n, n)).copy_from(&(-&b));
    bdg.view_mut((n, n), (n, n)).copy_from(&(-&a));
    let eig = SymmetricEigen::new(bdg);
    let negative: f64 = eig.eigenvalues.iter().filter(|&&e| e < 0.0).sum();
    -g * n as f64 + 0.5 * a.trace() + 0.5 * negative
}

/// Result of the exhaustive classical search.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMinimum {
    pub energy: f64,
    /// Basis indices of every minimizer, ascending.
    pub minimizers: Vec<usize>,
}

/// Minimum of the σ^z-diagonal energy over all 2^N bitstrings.
///
/// Only the strictly lower triangle of `j2` is read. Energies within
/// `1e-12·max(1, |E_min|)` of the minimum count as minimizers.
pub fn classical_enumerate(n: usize, j2: &DMatrix<f64>, j3: &[TripleCoupling]) -> Result<ClassicalMinimum> {
    if n == 0 || n > crate::spin_model::MAX_SPINS {
        return Err(Error::TooLarge(format!("cannot enumerate {n} spins")));
    }
    if j2.nrows() != n || j2.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "j2 is {}x{}, expected {n}x{n}",
            j2.nrows(),
            j2.ncols()
        )));
    }
    if let Some(t) = j3.iter().find(|t| t.j >= n || t.k >= n || t.l >= n) {
        return Err(Error::IndexOutOfRange(format!(
            "triple ({}, {}, {}) outside {n} spins",
            t.j, t.k, t.l
        )));
    }
    let energies: Vec<f64> = (0..1usize << n)
        .map(|b| {
            let s: Vec<f64> = (0..n).map(|j| spin(n, b, j)).collect();
            let mut e = 0.0;
            for j in 0..n {
                for k in 0..j {
                    e += j2[(j, k)] * s[j] * s[k];
                }
            }
            for t in j3 {
                e += t.value * s[t.j] * s[t.k] * s[t.l];
            }
            e
        })
        .collect();
    let energy = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * energy.abs().max(1.0);
    let minimizers = energies
        .iter()
        .enumerate()
        .filter(|(_, &e)| e - energy <= tol)
        .map(|(b, _)| b)
        .collect();
    Ok(ClassicalMinimum { energy, minimizers })
}

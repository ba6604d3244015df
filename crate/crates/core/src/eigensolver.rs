//! Thick-restart Lanczos with full reorthogonalization and locking.
//!
//! Eigenpairs are found from the bottom of the spectrum. Converged Ritz pairs
//! are locked and later Krylov spaces are kept orthogonal to them, so exactly
//! degenerate levels are recovered with their full multiplicity: a single
//! Krylov space only ever sees one direction of a degenerate eigenspace, and
//! the deflated runs pick up the remaining ones.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Real symmetric operator applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// y = A x
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Residual tolerance relative to `norm_estimate`.
    pub tolerance: f64,
    /// Upper bound on ‖A‖, used to scale the tolerance.
    pub norm_estimate: f64,
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tolerance: 1e-9,
            norm_estimate: 1.0,
            max_krylov: 160,
            max_restarts: 200,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// ‖A v − λ v‖ evaluated explicitly.
    pub residual: f64,
}

/// Incremental lowest-eigenpair solver. Locked pairs persist between calls to
/// [`LanczosSolver::extend_to`].
pub struct LanczosSolver<'a, A: LinearOperator + ?Sized> {
    op: &'a A,
    opts: LanczosOptions,
    rng: ChaCha8Rng,
    locked: Vec<Eigenpair>,
    matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // independent partial sums let the compiler vectorize the reduction
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// Two passes of classical Gram-Schmidt against every vector in `sets`.
fn orthogonalize<'v>(w: &mut [f64], sets: impl Iterator<Item = &'v [f64]> + Clone) {
    for _ in 0..2 {
        for q in sets.clone() {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

impl<'a, A: LinearOperator + ?Sized> LanczosSolver<'a, A> {
    pub fn new(op: &'a A, opts: LanczosOptions) -> Self {
        LanczosSolver {
            op,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            opts,
            locked: Vec::new(),
            matvecs: 0,
        }
    }

    pub fn matvecs(&self) -> usize {
        self.matvecs
    }

    fn abs_tolerance(&self) -> f64 {
        self.opts.tolerance * self.opts.norm_estimate.max(f64::MIN_POSITIVE)
    }

    fn random_start(&mut self) -> Vec<f64> {
        let n = self.op.dim();
        (0..n).map(|_| self.rng.gen::<f64>() - 0.5).collect()
    }

    /// The `k` lowest eigenpairs (ascending, with multiplicity), reusing
    /// everything locked so far.
    pub fn extend_to(&mut self, k: usize) -> Result<Vec<Eigenpair>> {
        let dim = self.op.dim();
        let k = k.min(dim);
        // lock until k pairs exist, then keep verifying that the deflated
        // operator has nothing below the k-th locked value
        loop {
            if self.locked.len() >= dim {
                break;
            }
            let found = self.deflated_pass(k.saturating_sub(self.locked.len()).max(1))?;
            if self.locked.len() < k {
                self.lock(found);
                continue;
            }
            let mut values: Vec<f64> = self.locked.iter().map(|p| p.value).collect();
            values.sort_by(f64::total_cmp);
            let kth = values[k - 1];
            let lowest_new = found.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
            if lowest_new < kth - self.abs_tolerance() {
                self.lock(found);
            } else {
                break;
            }
        }
        self.rotate_locked();
        let mut out = self.locked.clone();
        out.truncate(k);
        Ok(out)
    }

    /// Rayleigh-Ritz over the locked vectors. Pairs locked in separate passes
    /// can each be a mixture of a nearly degenerate multiplet; the rotation
    /// separates them to second order in the residuals.
    fn rotate_locked(&mut self) {
        let l = self.locked.len();
        if l == 0 {
            return;
        }
        let dim = self.op.dim();
        let images: Vec<Vec<f64>> = self
            .locked
            .iter()
            .map(|p| {
                let mut y = vec![0.0; dim];
                self.op.apply(&p.vector, &mut y);
                y
            })
            .collect();
        self.matvecs += l;
        let g = DMatrix::from_fn(l, l, |i, j| {
            0.5 * (dot(&self.locked[i].vector, &images[j]) + dot(&self.locked[j].vector, &images[i]))
        });
        let (values, s) = symmetric_eigen(&g);
        let rotated: Vec<Eigenpair> = values
            .iter()
            .enumerate()
            .map(|(c, &value)| {
                let mut v = vec![0.0; dim];
                let mut r = vec![0.0; dim];
                for (i, (p, y)) in self.locked.iter().zip(&images).enumerate() {
                    axpy(s[(i, c)], &p.vector, &mut v);
                    axpy(s[(i, c)], y, &mut r);
                }
                axpy(-value, &v, &mut r);
                Eigenpair { value, residual: norm(&r), vector: v }
            })
            .collect();
        self.locked = rotated;
    }

    fn lock(&mut self, found: Vec<Eigenpair>) {
        for mut p in found {
            // keep the locked set orthonormal
            orthogonalize(&mut p.vector, self.locked.iter().map(|q| q.vector.as_slice()));
            let nv = norm(&p.vector);
            if nv < 1e-8 {
                continue;
            }
            scale(1.0 / nv, &mut p.vector);
            self.locked.push(p);
        }
    }

    /// Converged lowest eigenpairs of the operator deflated by the locked set.
    /// Returns at least one pair (the lowest), plus any others that converged
    /// alongside it, up to `want`.
    ///
    /// Thick restart: when the basis is full, the lowest Ritz vectors are kept
    /// together with the last residual direction, so clusters of nearly equal
    /// eigenvalues converge as a block instead of one direction at a time.
    fn deflated_pass(&mut self, want: usize) -> Result<Vec<Eigenpair>> {
        let dim = self.op.dim();
        let free = dim - self.locked.len();
        let m_max = self.opts.max_krylov.min(free).max(1);
        let keep = (want + 6).min(m_max / 2);
        let tol = self.abs_tolerance();
        let mut start = self.random_start();
        orthogonalize(&mut start, self.locked.iter().map(|p| p.vector.as_slice()));
        let n0 = norm(&start);
        if n0 < 1e-12 {
            start = self.random_start();
            orthogonalize(&mut start, self.locked.iter().map(|p| p.vector.as_slice()));
        }
        let n0 = norm(&start);
        scale(1.0 / n0, &mut start);

        let mut basis: Vec<Vec<f64>> = vec![start];
        // projected matrix, grown as columns are processed
        let mut h = DMatrix::<f64>::zeros(m_max, m_max);
        // columns before `first` are retained Ritz vectors with known values
        let mut first = 0;
        let mut last_residual;
        let mut iterations = 0;
        let mut restarts = 0;
        let mut w = vec![0.0; dim];

        loop {
            let b = basis.len() - 1;
            self.op.apply(&basis[b], &mut w);
            self.matvecs += 1;
            iterations += 1;
            // second Gram-Schmidt sweep only when the first one cancelled a lot
            let before = norm(&w);
            for pass in 0..2 {
                for p in &self.locked {
                    let c = dot(&p.vector, &w);
                    axpy(-c, &p.vector, &mut w);
                }
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                    h[(i, b)] += c;
                }
                if pass == 0 && norm(&w) > std::f64::consts::FRAC_1_SQRT_2 * before {
                    break;
                }
            }
            for i in 0..b {
                h[(b, i)] = h[(i, b)];
            }
            let beta = norm(&w);
            let size = basis.len();
            let breakdown = beta <= 1e-13 * self.opts.norm_estimate.max(1.0);
            let full = size >= m_max;
            let check = breakdown || full || (size - first).is_multiple_of(6) || size == free;

            if check {
                let (theta, s) = symmetric_eigen(&h.view((0, 0), (size, size)).into_owned());
                let res_of = |i: usize| if breakdown { 0.0 } else { (beta * s[(size - 1, i)]).abs() };
                last_residual = res_of(0);
                let converged = (0..size.min(want)).take_while(|&i| res_of(i) <= tol).count();
                if converged > 0 || breakdown {
                    let count = if breakdown { size.min(want).max(1) } else { converged };
                    return Ok((0..count).map(|i| self.ritz_pair(&basis, &s, i)).collect());
                }
                if full {
                    if restarts >= self.opts.max_restarts {
                        break;
                    }
                    restarts += 1;
                    let kept = keep.max(1).min(size - 1).max(1);
                    let mut next: Vec<Vec<f64>> = (0..kept).map(|i| ritz_vector(&basis, &s, i)).collect();
                    scale(1.0 / beta, &mut w);
                    next.push(std::mem::replace(&mut w, vec![0.0; dim]));
                    h.fill(0.0);
                    // couplings to the residual direction are rebuilt when it is processed
                    for (i, t) in theta.iter().take(kept).enumerate() {
                        h[(i, i)] = *t;
                    }
                    basis = next;
                    first = kept;
                    continue;
                }
            }
            scale(1.0 / beta, &mut w);
            basis.push(std::mem::replace(&mut w, vec![0.0; dim]));
        }
        Err(Error::NonConvergence {
            iterations,
            residual: last_residual,
            tolerance: tol,
        })
    }

    fn ritz_pair(&mut self, basis: &[Vec<f64>], s: &DMatrix<f64>, i: usize) -> Eigenpair {
        let mut v = ritz_vector(basis, s, i);
        let nv = norm(&v);
        scale(1.0 / nv, &mut v);
        let mut hv = vec![0.0; v.len()];
        self.op.apply(&v, &mut hv);
        self.matvecs += 1;
        let value = dot(&v, &hv);
        axpy(-value, &v, &mut hv);
        Eigenpair {
            value,
            residual: norm(&hv),
            vector: v,
        }
    }
}

fn ritz_vector(basis: &[Vec<f64>], s: &DMatrix<f64>, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; basis[0].len()];
    for (j, q) in basis.iter().enumerate() {
        axpy(s[(j, i)], q, &mut v);
    }
    v
}

/// Ascending eigenvalues and eigenvectors (as columns) of a small symmetric matrix.
fn symmetric_eigen(t: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = crate::linalg::sym_eigen(t);
    (e.values, e.vectors)
}

/// Convenience wrapper: the `k` lowest eigenpairs of `op`.
pub fn lowest_eigenpairs<A: LinearOperator + ?Sized>(
    op: &A,
    k: usize,
    opts: LanczosOptions,
) -> Result<Vec<Eigenpair>> {
    LanczosSolver::new(op, opts).extend_to(k)
}

/// Dense matrix as a [`LinearOperator`].
impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

//! Dense symmetric eigendecomposition shared by the solvers.

use nalgebra::DMatrix;

/// Eigenvalues in ascending order with matching eigenvector columns.
pub(crate) struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Reads the lower triangle of `a`.
pub(crate) fn sym_eigen(a: &DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let evd = m.selfadjoint_eigendecomposition(faer::Side::Lower);
    let (u, s) = (evd.u(), evd.s().column_vector());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s.read(x).total_cmp(&s.read(y)));
    SymEigen {
        values: order.iter().map(|&i| s.read(i)).collect(),
        vectors: DMatrix::from_fn(n, n, |r, c| u.read(r, order[c])),
    }
}

//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Spectral radius of a square matrix (largest eigenvalue modulus).
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig_sym(a: &DMatrix<f64>) -> f64 {
    let sym = symmetrize(a);
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig_sym(a: &DMatrix<f64>) -> f64 {
    let sym = symmetrize(a);
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// `(A + Aᵀ)/2`, removing roundoff asymmetry.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Symmetric positive-semidefinite square root via eigendecomposition.
/// Negative eigenvalues below `-1e-10` are a caller bug; small negatives
/// from roundoff are clamped to zero.
pub fn sqrt_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(a);
    let eig = sym.symmetric_eigen();
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        debug_assert!(*v > -1e-10, "sqrt_psd on an indefinite matrix (eig {v})");
        *v = v.max(0.0).sqrt();
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn inv_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    symmetrize(a).cholesky().map(|c| c.inverse())
}

/// Matrix power by repeated multiplication (small exponents only).
pub fn mat_pow(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::identity(n, n);
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// Numerical rank from singular values, relative tolerance `tol`.
pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * smax).count()
}

/// Row-major nested `Vec` view of a matrix, for JSON serialization.
pub fn mat_to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

/// Matrix from row-major nested `Vec`s; `None` on ragged or empty-row input.
pub fn mat_from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nr = rows.len();
    if nr == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return None;
    }
    Some(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn vec_to_dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Stack matrices block-diagonally.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let nr: usize = blocks.iter().map(|b| b.nrows()).sum();
    let nc: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(nr, nc);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| c(x, 0.0)))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// 2-norm condition number (∞ for singular matrices).
pub fn cond(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular matrix".into()))
}

pub fn solve(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::InvalidArgument("singular matrix".into()))
}

/// Orthonormal basis of the numerical null space (singular values ≤ tol).
pub fn null_space(m: &CMatrix, tol: f64) -> CMatrix {
    let n = m.ncols();
    // pad to square so the SVD yields a full set of right singular vectors
    let rows = m.nrows().max(n);
    let mut sq = CMatrix::zeros(rows, n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let cols: Vec<_> = (0..n)
        .filter(|&i| svd.singular_values[i] <= tol)
        .map(|i| v_t.row(i).adjoint())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

pub fn is_lower_triangular(m: &CMatrix, tol: f64) -> bool {
    (0..m.nrows()).all(|i| (i + 1..m.ncols()).all(|j| m[(i, j)].norm() <= tol))
}

pub fn is_upper_triangular(m: &CMatrix, tol: f64) -> bool {
    (0..m.nrows()).all(|i| (0..i.min(m.ncols())).all(|j| m[(i, j)].norm() <= tol))
}

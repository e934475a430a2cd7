//! Small dense linear-algebra helpers shared by the matrix builders.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Maximum absolute row sum.
pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `||A^{-1}||_inf` computed by solving against the identity columns with one
/// LU factorization; the inverse is never formed by explicit inversion.
pub fn inv_inf_norm(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Argument("inverse norm needs a square matrix".into()));
    }
    let lu = a.clone().lu();
    let mut row_sums = vec![0.0; n];
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let col = lu
            .solve(&e)
            .ok_or_else(|| Error::Conditioning("matrix is singular".into()))?;
        for (i, v) in col.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Conditioning("non-finite inverse entry".into()));
            }
            row_sums[i] += v.abs();
        }
    }
    Ok(row_sums.into_iter().fold(0.0, f64::max))
}

/// Upper-triangular matrix of ones of order `r` (discrete integration).
pub fn upper_ones(r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, r, |i, j| if j >= i { 1.0 } else { 0.0 })
}

/// Inverse of [`upper_ones`]: ones on the diagonal, `-1` on the superdiagonal.
pub fn upper_diff(r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `A * upper_ones(ncols)` without forming the dense factor: running sums
/// along every row.
pub fn mul_upper_ones(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for j in 1..out.ncols() {
        for i in 0..out.nrows() {
            out[(i, j)] += out[(i, j - 1)];
        }
    }
    out
}

/// `upper_diff(nrows) * A`: row `i` becomes `row_i - row_{i+1}`, the last
/// row is kept.
pub fn upper_diff_mul(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    let r = out.nrows();
    for i in 0..r.saturating_sub(1) {
        for j in 0..out.ncols() {
            out[(i, j)] = a[(i, j)] - a[(i + 1, j)];
        }
    }
    out
}

/// Scale row `i` by `d[i]`.
pub fn scale_rows(a: &mut DMatrix<f64>, d: &[f64]) {
    debug_assert_eq!(a.nrows(), d.len());
    for (i, s) in d.iter().enumerate() {
        a.row_mut(i).scale_mut(*s);
    }
}

/// Scale column `j` by `d[j]`.
pub fn scale_cols(a: &mut DMatrix<f64>, d: &[f64]) {
    debug_assert_eq!(a.ncols(), d.len());
    for (j, s) in d.iter().enumerate() {
        a.column_mut(j).scale_mut(*s);
    }
}

/// Numerical rank from the singular values, relative to the largest one.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Smallest singular value.
pub fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Orthonormal basis of the null space of `a` (full row rank assumed),
/// together with the thin factors of `a^T = Q_1 R_1` for multiplier
/// recovery. Uses a Householder QR of `a^T` padded with zero columns so
/// that the full orthogonal factor is available.
pub struct RowSpaceSplit {
    pub range_q: DMatrix<f64>,
    pub range_r: DMatrix<f64>,
    pub null_basis: DMatrix<f64>,
}

pub fn row_space_split(a: &DMatrix<f64>) -> RowSpaceSplit {
    let (k, n) = a.shape();
    debug_assert!(k <= n);
    let mut padded = DMatrix::zeros(n, n);
    padded.view_mut((0, 0), (n, k)).copy_from(&a.transpose());
    let qr = padded.qr();
    let q = qr.q();
    let r = qr.r();
    RowSpaceSplit {
        range_q: q.columns(0, k).into_owned(),
        range_r: r.view((0, 0), (k, k)).into_owned(),
        null_basis: q.columns(k, n - k).into_owned(),
    }
}

/// Solve the upper-triangular system `r x = b`.
pub fn solve_upper(r: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    r.solve_upper_triangular(b)
        .ok_or_else(|| Error::Conditioning("singular triangular factor".into()))
}

/// Cholesky solve for a symmetric positive definite system.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

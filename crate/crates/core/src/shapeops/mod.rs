//! Constraint and analysis matrices for shape-constrained splines: weighted
//! difference operators, active sets and the null-space factor `F`, the
//! grid discretisation matrices `X`, `Z`, `H`, and Gramians.

mod discretize;
mod factor;
mod gramian;

pub use discretize::{build_x, build_z_h, refinement_grid, x_final, XStages, ZStages};
pub use factor::{build_f, tau_knots, v_alpha_knots, FStages, TauKnots};
pub use gramian::{grid_face_gramian, gramian, inner_products, limit_gramians, GramianReport, LimitGramians};

use nalgebra::{DMatrix, DVector};

use crate::error::{arg, Result};
use crate::splines::KnotSequence;

/// Tolerance for `D_m b >= -tol` in shape-feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Index set `alpha` of active constraints, stored 1-based as in the
/// constraint numbering `1..=K-1`, with its sorted complement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActiveSet {
    k_n: usize,
    m: usize,
    alpha: Vec<usize>,
    complement: Vec<usize>,
}

impl ActiveSet {
    /// `alpha` may be given in any order; duplicates and out-of-range
    /// indices are rejected.
    pub fn new(k_n: usize, m: usize, alpha: &[usize]) -> Result<Self> {
        if k_n == 0 || m == 0 {
            return arg("active set needs K >= 1 and m >= 1");
        }
        let mut mask = vec![false; k_n];
        for &i in alpha {
            if i == 0 || i >= k_n {
                return arg(format!("constraint index {i} outside 1..={}", k_n - 1));
            }
            if mask[i] {
                return arg(format!("constraint index {i} listed twice"));
            }
            mask[i] = true;
        }
        Ok(Self::from_flags(k_n, m, &mask[1..]))
    }

    /// `flags[i - 1]` says whether constraint `i` is active.
    pub fn from_flags(k_n: usize, m: usize, flags: &[bool]) -> Self {
        assert_eq!(flags.len(), k_n - 1, "one flag per constraint");
        let (mut alpha, mut complement) = (Vec::new(), Vec::new());
        for (i, &f) in flags.iter().enumerate() {
            if f {
                alpha.push(i + 1);
            } else {
                complement.push(i + 1);
            }
        }
        ActiveSet {
            k_n,
            m,
            alpha,
            complement,
        }
    }

    /// Bit `i - 1` of `mask` marks constraint `i` active.
    pub fn from_mask(k_n: usize, m: usize, mask: u64) -> Self {
        let flags: Vec<bool> = (0..k_n - 1).map(|i| mask >> i & 1 == 1).collect();
        Self::from_flags(k_n, m, &flags)
    }

    pub fn empty(k_n: usize, m: usize) -> Self {
        Self::from_flags(k_n, m, &vec![false; k_n - 1])
    }

    pub fn full(k_n: usize, m: usize) -> Self {
        Self::from_flags(k_n, m, &vec![true; k_n - 1])
    }

    pub fn k_n(&self) -> usize {
        self.k_n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> &[usize] {
        &self.alpha
    }

    /// Inactive constraint indices `i_1 < i_2 < ...`.
    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    /// `|complement| + m`, the number of free directions on this face.
    pub fn q_alpha(&self) -> usize {
        self.complement.len() + self.m
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.alpha.binary_search(&i).is_ok()
    }
}

impl std::fmt::Display for ActiveSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.alpha.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

/// First-difference matrix of size `k x (k + 1)`; row `i` maps `v` to
/// `v[i+1] - v[i]`.
pub fn first_difference(k: usize) -> Result<DMatrix<f64>> {
    if k < 1 {
        return arg("first_difference needs k >= 1");
    }
    Ok(difference_block(k))
}

fn difference_block(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k + 1, |i, j| {
        if j == i {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Diagonal of the knot-spacing matrix of level `p`: entries
/// `(k_i - k_{i-p}) / p` for `i = 1..=K+p-1`. Level `0` is the identity of
/// order `K - 1`.
pub fn delta_diag(p: usize, knots: &KnotSequence) -> DVector<f64> {
    let k_n = knots.num_intervals();
    if p == 0 {
        return DVector::from_element(k_n - 1, 1.0);
    }
    DVector::from_fn(k_n + p - 1, |i, _| {
        let i = i as isize + 1;
        (knots.knot(i) - knots.knot(i - p as isize)) / p as f64
    })
}

/// Spacing matrix of level `p` for order-`m` splines, `0 <= p <= m - 1`.
pub fn delta_matrix(m: usize, p: usize, knots: &KnotSequence) -> Result<DMatrix<f64>> {
    if m == 0 || p >= m {
        return arg(format!("spacing level {p} outside 0..={}", m.saturating_sub(1)));
    }
    Ok(DMatrix::from_diagonal(&delta_diag(p, knots)))
}

/// Weighted difference operators of every level for order-`m` splines.
/// Stage `p` has `T_n - p` rows and `T_n = K + m - 1` columns.
#[derive(Debug, Clone)]
pub struct DifferenceOperator {
    pub m: usize,
    pub stages: Vec<DMatrix<f64>>,
}

impl DifferenceOperator {
    pub fn stage(&self, p: usize) -> &DMatrix<f64> {
        &self.stages[p]
    }

    /// The constraint matrix (top stage), one row per constraint `1..=K-1`.
    pub fn constraint(&self) -> &DMatrix<f64> {
        &self.stages[self.m]
    }
}

pub fn weighted_difference(m: usize, knots: &KnotSequence) -> Result<DifferenceOperator> {
    if m == 0 {
        return arg("spline order must be at least 1");
    }
    let t_n = knots.basis_len(m);
    let mut stages = vec![DMatrix::identity(t_n, t_n)];
    for p in 1..=m {
        let diff = difference_block(t_n - p);
        let mut next = diff * &stages[p - 1];
        let inv: Vec<f64> = delta_diag(m - p, knots).iter().map(|d| 1.0 / d).collect();
        crate::linalg::scale_rows(&mut next, &inv);
        stages.push(next);
    }
    Ok(DifferenceOperator { m, stages })
}

fn check_len(m: usize, knots: &KnotSequence, b: &[f64]) -> Result<()> {
    let t_n = knots.basis_len(m);
    if b.len() != t_n {
        return arg(format!("expected {t_n} coefficients, got {}", b.len()));
    }
    Ok(())
}

/// Whether the order-`m` spline with coefficients `b` lies in the shape class.
pub fn is_shape_feasible(m: usize, knots: &KnotSequence, b: &[f64]) -> Result<bool> {
    Ok(constraint_values(m, knots, b)?
        .iter()
        .all(|v| *v >= -FEASIBILITY_TOL))
}

/// `D_m b`, one value per constraint.
pub fn constraint_values(m: usize, knots: &KnotSequence, b: &[f64]) -> Result<DVector<f64>> {
    derivative_coeffs(m, knots, b, m)
}

/// Coefficients of the `j`-th derivative in the order `m - j` basis
/// (`j = m` gives the constraint values).
pub fn derivative_coeffs(
    m: usize,
    knots: &KnotSequence,
    b: &[f64],
    j: usize,
) -> Result<DVector<f64>> {
    check_len(m, knots, b)?;
    if j > m {
        return arg(format!("derivative order {j} exceeds m = {m}"));
    }
    let ops = weighted_difference(m, knots)?;
    Ok(ops.stage(j) * DVector::from_column_slice(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_matrix_by_hand() {
        let d = first_difference(2).unwrap();
        assert_eq!(
            d,
            DMatrix::from_row_slice(2, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0])
        );
        let v = DVector::from_column_slice(&[1.0, 2.0, 4.0, 8.0]);
        assert_eq!(
            (first_difference(3).unwrap() * v).as_slice(),
            &[1.0, 2.0, 4.0]
        );
        assert!(first_difference(0).is_err());
    }

    #[test]
    fn spacing_diagonals() {
        let knots = KnotSequence::uniform(4).unwrap();
        assert_eq!(delta_diag(1, &knots).as_slice(), &[0.25; 4]);
        assert_eq!(
            delta_diag(2, &knots).as_slice(),
            &[0.125, 0.25, 0.25, 0.25, 0.125]
        );
        assert!(delta_matrix(2, 2, &knots).is_err());
    }

    #[test]
    fn order_one_operator_is_plain_difference() {
        let knots = KnotSequence::new(vec![0.0, 0.2, 0.5, 0.7, 1.0], 0.5, 1.5).unwrap();
        let ops = weighted_difference(1, &knots).unwrap();
        assert_eq!(ops.constraint(), &first_difference(3).unwrap());
    }

    #[test]
    fn second_order_operator_matches_product() {
        let knots = KnotSequence::uniform(4).unwrap();
        let ops = weighted_difference(2, &knots).unwrap();
        // Delta_0^{-1} D^{(3)} Delta_1^{-1} D^{(4)}
        let d1 = DMatrix::from_diagonal(&delta_diag(1, &knots).map(|v| 1.0 / v));
        let expect = first_difference(3).unwrap() * d1 * first_difference(4).unwrap();
        assert!((ops.constraint() - expect).abs().max() < 1e-12);
    }

    #[test]
    fn active_set_bookkeeping() {
        let a = ActiveSet::new(6, 2, &[4, 1, 3]).unwrap();
        assert_eq!(a.alpha(), &[1, 3, 4]);
        assert_eq!(a.complement(), &[2, 5]);
        assert_eq!(a.q_alpha(), 4);
        assert_eq!(ActiveSet::from_mask(6, 2, 0b01101), a);
        assert!(ActiveSet::new(6, 2, &[6]).is_err());
        assert!(ActiveSet::new(6, 2, &[2, 2]).is_err());
        assert_eq!(a.to_string(), "{1 3 4}");
    }
}

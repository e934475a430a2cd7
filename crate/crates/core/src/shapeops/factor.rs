use nalgebra::{DMatrix, DVector};

use super::{delta_diag, ActiveSet};
use crate::error::{arg, Result};
use crate::linalg::{mul_upper_ones, scale_cols, scale_rows, upper_diff_mul};
use crate::splines::KnotSequence;

/// Magnitude below which entries of the final factor are set to zero.
const SNAP: f64 = 1e-13;

/// Knots of the face with active set `alpha`: `0` for index `<= 0`, the
/// inactive knots `k_{i_1}, k_{i_2}, ...` at `1..=|complement|`, and `1`
/// afterwards.
#[derive(Debug, Clone)]
pub struct TauKnots {
    inner: Vec<f64>,
}

impl TauKnots {
    pub fn get(&self, k: isize) -> f64 {
        if k <= 0 {
            0.0
        } else if k as usize > self.inner.len() {
            1.0
        } else {
            self.inner[k as usize - 1]
        }
    }

    /// Number of inactive interior knots.
    pub fn interior_len(&self) -> usize {
        self.inner.len()
    }

    /// Values at indices `1 - m ..= q_alpha`.
    pub fn extended(&self, m: usize) -> Vec<f64> {
        let q = self.inner.len() + m;
        (1 - m as isize..=q as isize).map(|k| self.get(k)).collect()
    }
}

fn check_alpha(alpha: &ActiveSet, knots: &KnotSequence) -> Result<()> {
    if alpha.k_n() != knots.num_intervals() {
        return arg(format!(
            "active set built for K={} but knots have K={}",
            alpha.k_n(),
            knots.num_intervals()
        ));
    }
    Ok(())
}

pub fn tau_knots(alpha: &ActiveSet, knots: &KnotSequence) -> Result<TauKnots> {
    check_alpha(alpha, knots)?;
    Ok(TauKnots {
        inner: alpha
            .complement()
            .iter()
            .map(|&i| knots.knot(i as isize))
            .collect(),
    })
}

/// The coarser knot sequence `{0, k_{i_1}, ..., 1}` of the face. It is only
/// checked for ordering, not for mesh-class bounds.
pub fn v_alpha_knots(alpha: &ActiveSet, knots: &KnotSequence) -> Result<KnotSequence> {
    check_alpha(alpha, knots)?;
    let mut pts = Vec::with_capacity(alpha.complement().len() + 2);
    pts.push(0.0);
    pts.extend(alpha.complement().iter().map(|&i| knots.knot(i as isize)));
    pts.push(1.0);
    KnotSequence::from_breakpoints(pts)
}

/// The factor recursion: `stages[p-1]` is `F^(p)` (`q_alpha x T_n`),
/// `xi[p-1]` and `delta_hat[p-1]` are the diagonals of the level-`p`
/// scaling matrices.
#[derive(Debug, Clone)]
pub struct FStages {
    pub m: usize,
    pub stages: Vec<DMatrix<f64>>,
    pub xi: Vec<DVector<f64>>,
    pub delta_hat: Vec<DVector<f64>>,
}

impl FStages {
    /// The top-level factor `F^(m)`; its rows span the feasible directions
    /// of the face.
    pub fn f(&self) -> &DMatrix<f64> {
        &self.stages[self.m - 1]
    }

    /// Diagonal of the top-level scaling `Xi^(m)`.
    pub fn xi_top(&self) -> &DVector<f64> {
        &self.xi[self.m - 1]
    }
}

/// Diagonal of `Xi^(p)`: `m - p` ones then `p / (tau_k - tau_{k-p})`.
pub(crate) fn xi_diag(p: usize, m: usize, tau: &TauKnots) -> DVector<f64> {
    let q = tau.interior_len() + m;
    let mut d = DVector::from_element(q, 1.0);
    for k in 1..=(tau.interior_len() + p) {
        let k = k as isize;
        d[m - p + k as usize - 1] = p as f64 / (tau.get(k) - tau.get(k - p as isize));
    }
    d
}

/// Diagonal of the padded spacing matrix: `m - p` ones then the level-`p`
/// spacings. Order `T_n`.
pub(crate) fn delta_hat_diag(p: usize, m: usize, knots: &KnotSequence) -> DVector<f64> {
    let t_n = knots.basis_len(m);
    let mut d = DVector::from_element(t_n, 1.0);
    let inner = delta_diag(p, knots);
    d.rows_mut(m - p, inner.len()).copy_from(&inner);
    d
}

/// `F^(1) = blockdiag(I_{m-1}, E)` where row `r` of `E` has ones on the
/// knot intervals between consecutive inactive knots.
pub(crate) fn f_first(alpha: &ActiveSet, m: usize) -> DMatrix<f64> {
    let k_n = alpha.k_n();
    let t_n = k_n + m - 1;
    let q = alpha.q_alpha();
    let mut f = DMatrix::zeros(q, t_n);
    for i in 0..m - 1 {
        f[(i, i)] = 1.0;
    }
    let mut bounds = vec![0];
    bounds.extend_from_slice(alpha.complement());
    bounds.push(k_n);
    for (r, w) in bounds.windows(2).enumerate() {
        for col in w[0]..w[1] {
            f[(m - 1 + r, m - 1 + col)] = 1.0;
        }
    }
    f
}

/// Build every stage of the face factor for order-`m` splines.
pub fn build_f(alpha: &ActiveSet, m: usize, knots: &KnotSequence) -> Result<FStages> {
    check_alpha(alpha, knots)?;
    if alpha.m() != m {
        return arg(format!("active set built for m={} but m={m} requested", alpha.m()));
    }
    let tau = tau_knots(alpha, knots)?;
    let xi: Vec<DVector<f64>> = (1..=m).map(|p| xi_diag(p, m, &tau)).collect();
    let delta_hat: Vec<DVector<f64>> = (1..=m).map(|p| delta_hat_diag(p, m, knots)).collect();
    let mut stages = vec![f_first(alpha, m)];
    for p in 2..=m {
        let mut g = stages[p - 2].clone();
        scale_rows(&mut g, xi[p - 2].as_slice());
        scale_cols(&mut g, delta_hat[p - 2].as_slice());
        let g = upper_diff_mul(&mul_upper_ones(&g));
        stages.push(g);
    }
    if let Some(top) = stages.last_mut() {
        top.apply(|v| {
            if v.abs() < SNAP {
                *v = 0.0
            }
        });
    }
    Ok(FStages {
        m,
        stages,
        xi,
        delta_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{upper_diff, upper_ones};

    #[test]
    fn tau_lookup() {
        let knots = KnotSequence::uniform(6).unwrap();
        let a = ActiveSet::new(6, 3, &[1, 3, 4]).unwrap();
        let tau = tau_knots(&a, &knots).unwrap();
        assert_eq!(tau.get(1), knots.knot(2));
        assert_eq!(tau.get(2), knots.knot(5));
        assert_eq!(tau.extended(3), vec![0.0, 0.0, 0.0, 1.0 / 3.0, 5.0 / 6.0, 1.0, 1.0, 1.0]);
        let full = tau_knots(&ActiveSet::full(6, 3), &knots).unwrap();
        assert_eq!(full.extended(3), vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn face_knots() {
        let knots = KnotSequence::uniform(6).unwrap();
        let v = v_alpha_knots(&ActiveSet::new(6, 2, &[1, 2, 4, 5]).unwrap(), &knots).unwrap();
        assert_eq!(v.points(), &[0.0, 0.5, 1.0]);
        let v = v_alpha_knots(&ActiveSet::full(6, 2), &knots).unwrap();
        assert_eq!(v.points(), &[0.0, 1.0]);
        let v = v_alpha_knots(&ActiveSet::empty(6, 2), &knots).unwrap();
        assert_eq!(v.points(), knots.points());
    }

    #[test]
    fn first_stage_runs_of_ones() {
        let a = ActiveSet::new(6, 1, &[1, 3, 4]).unwrap();
        let f = f_first(&a, 1);
        let expect = DMatrix::from_row_slice(
            3,
            6,
            &[
                1.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 1.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
            ],
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn empty_alpha_gives_identity() {
        let knots = KnotSequence::new(vec![0.0, 0.15, 0.4, 0.6, 0.8, 1.0], 0.5, 1.5).unwrap();
        for m in 1..=4 {
            let fs = build_f(&ActiveSet::empty(5, m), m, &knots).unwrap();
            for f in &fs.stages {
                assert!((f - DMatrix::identity(5 + m - 1, 5 + m - 1)).abs().max() < 1e-14);
            }
        }
    }

    #[test]
    fn recursion_matches_dense_product() {
        let knots = KnotSequence::new(vec![0.0, 0.15, 0.4, 0.6, 0.8, 1.0], 0.5, 1.5).unwrap();
        let m = 3;
        let a = ActiveSet::new(5, m, &[1, 3]).unwrap();
        let fs = build_f(&a, m, &knots).unwrap();
        let q = a.q_alpha();
        let t_n = 7;
        let mut f = f_first(&a, m);
        for p in 2..=m {
            f = upper_diff(q)
                * DMatrix::from_diagonal(&fs.xi[p - 2])
                * f
                * DMatrix::from_diagonal(&fs.delta_hat[p - 2])
                * upper_ones(t_n);
        }
        assert!((f - fs.f()).abs().max() < 1e-12);
    }
}

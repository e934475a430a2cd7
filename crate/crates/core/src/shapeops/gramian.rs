use nalgebra::DMatrix;

use super::discretize::{build_z_h, x_final};
use super::factor::{tau_knots, v_alpha_knots, xi_diag};
use super::ActiveSet;
use crate::error::{Error, Result};
use crate::linalg::{inv_inf_norm, scale_rows};
use crate::quadrature::gauss_legendre;
use crate::splines::{l1_norm, nonzero_basis, KnotSequence};

/// `<B_i, B_j>` for all order-`p` B-splines on `knots`, by Gauss-Legendre
/// quadrature with `p` nodes per knot interval (exact for these integrands).
pub fn inner_products(p: usize, knots: &KnotSequence) -> DMatrix<f64> {
    let n = knots.basis_len(p);
    let (nodes, weights) = gauss_legendre(p);
    let mut g = DMatrix::zeros(n, n);
    for w in knots.points().windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (t, wt) in nodes.iter().zip(&weights) {
            let x = mid + half * t;
            let (first, vals) = nonzero_basis(p, knots, x);
            for (i, vi) in vals.iter().enumerate() {
                for (j, vj) in vals.iter().enumerate() {
                    g[(first + i, first + j)] += half * wt * vi * vj;
                }
            }
        }
    }
    g
}

/// Row-normalised Gramian of the face B-splines and the norm of its inverse.
#[derive(Debug, Clone)]
pub struct GramianReport {
    pub g: DMatrix<f64>,
    pub inv_inf_norm: f64,
}

pub fn gramian(alpha: &ActiveSet, m: usize, knots: &KnotSequence) -> Result<GramianReport> {
    let v = v_alpha_knots(alpha, knots)?;
    let mut g = inner_products(m, &v);
    let norms: Vec<f64> = (0..g.nrows())
        .map(|i| l1_norm(m, &v, i).map(|n| 1.0 / n))
        .collect::<Result<_>>()?;
    scale_rows(&mut g, &norms);
    let inv_inf_norm = inv_inf_norm(&g).map_err(|e| match e {
        Error::Conditioning(msg) => Error::Conditioning(format!("face Gramian: {msg}")),
        other => other,
    })?;
    Ok(GramianReport { g, inv_inf_norm })
}

/// `(1/L) Xi^(m) H H^T`, the grid approximation of the face Gramian.
pub fn grid_face_gramian(alpha: &ActiveSet, m: usize, knots: &KnotSequence, l: usize) -> Result<DMatrix<f64>> {
    let zs = build_z_h(alpha, m, knots, l)?;
    let tau = tau_knots(alpha, knots)?;
    let mut out = &zs.h * zs.h.transpose() / l as f64;
    scale_rows(&mut out, xi_diag(m, m, &tau).as_slice());
    Ok(out)
}

/// The knot-level Gramian `K <B_i, B_j>` and its grid approximation
/// `(K/L) X X^T` with `X` the first `L` columns of the top discretisation
/// stage.
#[derive(Debug, Clone)]
pub struct LimitGramians {
    pub lambda_hat: DMatrix<f64>,
    pub lambda_tilde: DMatrix<f64>,
}

pub fn limit_gramians(m: usize, knots: &KnotSequence, l: usize) -> Result<LimitGramians> {
    let k = knots.num_intervals() as f64;
    let lambda_hat = inner_products(m, knots) * k;
    let x = x_final(m, knots, l)?;
    let xt = x.columns(0, l);
    let lambda_tilde = xt * xt.transpose() * (k / l as f64);
    Ok(LimitGramians {
        lambda_hat,
        lambda_tilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_gramian_is_identity() {
        let knots = KnotSequence::new(vec![0.0, 0.2, 0.45, 0.7, 1.0], 0.8, 1.2).unwrap();
        let r = gramian(&ActiveSet::new(4, 1, &[2]).unwrap(), 1, &knots).unwrap();
        assert!((&r.g - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        assert!((r.inv_inf_norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hat_functions_by_hand() {
        // V = {0, 1/2, 1}; hats on [0,1/2], [0,1], [1/2,1]
        let knots = KnotSequence::uniform(2).unwrap();
        let r = gramian(&ActiveSet::empty(2, 2), 2, &knots).unwrap();
        // <B1,B1> = 1/6, <B1,B2> = 1/12, <B2,B2> = 1/3, norms 1/4, 1/2, 1/4
        let expect = DMatrix::from_row_slice(
            3,
            3,
            &[
                2.0 / 3.0, 1.0 / 3.0, 0.0, //
                1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, //
                0.0, 1.0 / 3.0, 2.0 / 3.0,
            ],
        );
        assert!((&r.g - expect).abs().max() < 1e-14);
    }

    #[test]
    fn rows_sum_to_one() {
        let knots = KnotSequence::new(vec![0.0, 0.15, 0.4, 0.6, 0.8, 1.0], 0.5, 1.5).unwrap();
        for m in 1..=4 {
            let r = gramian(&ActiveSet::new(5, m, &[2]).unwrap(), m, &knots).unwrap();
            for row in r.g.row_iter() {
                assert!((row.sum() - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn grid_gramian_converges() {
        let knots = KnotSequence::uniform(3).unwrap();
        let e = |l| {
            let lg = limit_gramians(2, &knots, l).unwrap();
            (lg.lambda_tilde - lg.lambda_hat).abs().max()
        };
        assert!(e(600) < e(60));
    }
}

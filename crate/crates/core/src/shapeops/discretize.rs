use nalgebra::DMatrix;

use super::factor::{delta_hat_diag, xi_diag};
use super::{tau_knots, ActiveSet};
use crate::error::{arg, Result};
use crate::linalg::{mul_upper_ones, scale_cols, scale_rows, upper_diff_mul};
use crate::splines::KnotSequence;

/// Largest grid size the builders accept; the matrices are dense in `L`.
pub const MAX_GRID: u64 = 50_000_000;

/// Grid size triple `(L, M, J)` with `M = ceil(m K / c1)` and
/// `L = J * M^(m+1)`.
pub fn refinement_grid(
    m: usize,
    c_kappa_1: f64,
    k: usize,
    j: usize,
) -> Result<(usize, usize, usize)> {
    if k == 0 || j == 0 || m == 0 {
        return arg("refinement grid needs m, K, J >= 1");
    }
    if !(c_kappa_1 > 0.0 && c_kappa_1 <= 1.0) {
        return arg(format!("c1 must lie in (0, 1], got {c_kappa_1}"));
    }
    let mm = ((m * k) as f64 / c_kappa_1).ceil() as u64;
    let l = (0..=m)
        .try_fold(j as u64, |acc, _| acc.checked_mul(mm))
        .filter(|l| *l <= MAX_GRID);
    match l {
        Some(l) => Ok((l as usize, mm as usize, j)),
        None => arg(format!(
            "grid size J*M^(m+1) with M={mm}, J={j}, m={m} exceeds {MAX_GRID}; use a smaller K or J"
        )),
    }
}

fn check_grid(knots: &KnotSequence, l: usize) -> Result<()> {
    let bound = knots.num_intervals() as f64 / knots.c_kappa_1();
    if !(l as f64 > bound) {
        return arg(format!("grid size L={l} must exceed K/c1 = {bound}"));
    }
    if l as u64 > MAX_GRID {
        return arg(format!("grid size L={l} exceeds {MAX_GRID}"));
    }
    Ok(())
}

/// 1-based knot interval of every grid point `(l - 1) / L`, `l = 1..=L`.
fn grid_intervals(knots: &KnotSequence, l: usize) -> Vec<usize> {
    (0..l)
        .map(|i| knots.interval_of(i as f64 / l as f64))
        .collect()
}

/// Stages `X_1 .. X_m`, each `T_n x (L + m - 1)`.
#[derive(Debug, Clone)]
pub struct XStages {
    pub l: usize,
    pub stages: Vec<DMatrix<f64>>,
}

fn x_first(m: usize, knots: &KnotSequence, l: usize) -> DMatrix<f64> {
    let t_n = knots.basis_len(m);
    let mut x = DMatrix::zeros(t_n, l + m - 1);
    for i in 0..m - 1 {
        x[(i, i)] = 1.0;
    }
    for (col, j) in grid_intervals(knots, l).into_iter().enumerate() {
        x[(m - 1 + j - 1, m - 1 + col)] = 1.0;
    }
    x
}

fn x_step(prev: &DMatrix<f64>, p: usize, m: usize, knots: &KnotSequence, l: usize) -> DMatrix<f64> {
    // X_p = Dhat * Delta_hat_{p-1}^{-1} * X_{p-1} * Gamma_{p-1} * Shat
    let lp = prev.ncols();
    let gamma: Vec<f64> = (0..lp)
        .map(|c| if c < m - p + 1 { 1.0 } else { 1.0 / l as f64 })
        .collect();
    let mut g = prev.clone();
    scale_cols(&mut g, &gamma);
    let mut g = mul_upper_ones(&g);
    let inv: Vec<f64> = delta_hat_diag(p - 1, m, knots).iter().map(|d| 1.0 / d).collect();
    scale_rows(&mut g, &inv);
    upper_diff_mul(&g)
}

/// All discretisation stages for order-`m` splines on a grid of `L` points.
pub fn build_x(m: usize, knots: &KnotSequence, l: usize) -> Result<XStages> {
    check_grid(knots, l)?;
    let mut stages = vec![x_first(m, knots, l)];
    for p in 2..=m {
        let next = x_step(&stages[p - 2], p, m, knots, l);
        stages.push(next);
    }
    Ok(XStages { l, stages })
}

/// Only the top stage `X_m`, keeping one intermediate at a time.
pub fn x_final(m: usize, knots: &KnotSequence, l: usize) -> Result<DMatrix<f64>> {
    check_grid(knots, l)?;
    let mut x = x_first(m, knots, l);
    for p in 2..=m {
        x = x_step(&x, p, m, knots, l);
    }
    Ok(x)
}

/// `Z_1 .. Z_m` from the entry recursion (`Z_p` is `(|complement| + p) x
/// (L + p - 1)`) and the truncation `H = Z_m[:, ..L]`.
#[derive(Debug, Clone)]
pub struct ZStages {
    pub l: usize,
    pub z: Vec<DMatrix<f64>>,
    pub h: DMatrix<f64>,
}

pub fn build_z_h(alpha: &ActiveSet, m: usize, knots: &KnotSequence, l: usize) -> Result<ZStages> {
    check_grid(knots, l)?;
    let tau = tau_knots(alpha, knots)?;
    let nc = alpha.complement().len();
    // Z_1 = E * Etilde: grid point lands in the face interval containing its knot interval
    let mut bounds = vec![0];
    bounds.extend_from_slice(alpha.complement());
    bounds.push(knots.num_intervals());
    let mut z1 = DMatrix::zeros(nc + 1, l);
    for (col, i) in grid_intervals(knots, l).into_iter().enumerate() {
        let row = bounds[1..].partition_point(|&b| b < i);
        z1[(row, col)] = 1.0;
    }
    let mut z = vec![z1];
    let lf = l as f64;
    for p in 2..=m {
        let prev = &z[p - 2];
        let rows = nc + p;
        let cols = l + p - 1;
        // xi[k-1] = (p-1) / (tau_k - tau_{k-p+1}), k = 1..=nc+p-1
        let xi = xi_diag(p - 1, m, &tau);
        let coef: Vec<f64> = (0..nc + p - 1).map(|k| xi[m - p + 1 + k] / lf).collect();
        let mut next = DMatrix::zeros(rows, cols);
        next[(0, 0)] = 1.0;
        // running sums of row j of Z_{p-1} over its first k-1 columns
        let mut sums = vec![0.0; rows - 1];
        for k in 1..cols {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += prev[(j, k - 1)];
            }
            for j in 0..rows {
                let mut v = if j == 0 { 1.0 } else { coef[j - 1] * sums[j - 1] };
                if j + 1 < rows {
                    v -= coef[j] * sums[j];
                }
                next[(j, k)] = v;
            }
        }
        z.push(next);
    }
    let h = z[m - 1].columns(0, l).into_owned();
    Ok(ZStages { l, z, h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{upper_diff, upper_ones};
    use crate::shapeops::build_f;
    use crate::splines::eval_basis;

    #[test]
    fn refinement_grid_arithmetic() {
        assert_eq!(refinement_grid(1, 1.0, 4, 2).unwrap(), (32, 4, 2));
        assert_eq!(refinement_grid(2, 1.0, 3, 1).unwrap(), (216, 6, 1));
        assert_eq!(refinement_grid(2, 1.0, 5, 5).unwrap(), (5000, 10, 5));
        assert!(refinement_grid(4, 0.5, 40, 3).is_err());
    }

    #[test]
    fn indicator_rows_partition_grid() {
        let knots = KnotSequence::new(vec![0.0, 0.3, 0.55, 1.0], 0.6, 1.5).unwrap();
        let x = x_first(1, &knots, 20);
        let counts: Vec<f64> = x.row_iter().map(|r| r.sum()).collect();
        assert_eq!(counts, vec![6.0, 5.0, 9.0]);
        assert!(build_x(1, &knots, 5).is_err());
    }

    #[test]
    fn second_stage_matches_dense_product() {
        let knots = KnotSequence::uniform(3).unwrap();
        let (m, l) = (2, 20);
        let xs = build_x(m, &knots, l).unwrap();
        let lp = l + m - 1;
        let gamma = DMatrix::from_fn(lp, lp, |i, j| {
            if i != j {
                0.0
            } else if i < m - 1 {
                1.0
            } else {
                1.0 / l as f64
            }
        });
        let dhat = crate::shapeops::factor::delta_hat_diag(1, m, &knots);
        let dinv = DMatrix::from_diagonal(&dhat.map(|v| 1.0 / v));
        let expect = upper_diff(4) * dinv * &xs.stages[0] * gamma * upper_ones(lp);
        assert!((&xs.stages[1] - expect).abs().max() < 1e-12);
        assert!((x_final(m, &knots, l).unwrap() - &xs.stages[1]).abs().max() == 0.0);
    }

    #[test]
    fn first_z_stage_is_face_indicator() {
        let knots = KnotSequence::uniform(6).unwrap();
        let a = ActiveSet::new(6, 3, &[1, 3, 4, 5]).unwrap();
        let zs = build_z_h(&a, 3, &knots, 60).unwrap();
        let v = crate::shapeops::v_alpha_knots(&a, &knots).unwrap();
        for k in 0..60 {
            let b = eval_basis(1, &v, k as f64 / 60.0).unwrap();
            for (j, bj) in b.iter().enumerate() {
                assert_eq!(zs.z[0][(j, k)], *bj);
            }
        }
        for z in &zs.z {
            assert_eq!(z[(0, 0)], 1.0);
            assert!(z.column(0).iter().skip(1).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn recursion_agrees_with_factor_product() {
        let knots = KnotSequence::uniform(4).unwrap();
        let a = ActiveSet::new(4, 2, &[1, 3]).unwrap();
        let zs = build_z_h(&a, 2, &knots, 50).unwrap();
        let prod = build_f(&a, 2, &knots).unwrap().f() * x_final(2, &knots, 50).unwrap();
        assert!((&zs.z[1] - prod).abs().max() < 1e-12);
    }
}

//! The shape-constrained quadratic program
//! `min 1/2 b' Lambda b - b' ybar  s.t.  D_m b >= 0`,
//! its piecewise-linear solution map, and Lipschitz constants of that map.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{arg, Error, Result};
use crate::linalg::{inf_norm, row_space_split, scale_rows, spd_solve, vec_inf_norm};
use crate::rng::Stream;
use crate::shapeops::{build_f, ActiveSet, DifferenceOperator};
use crate::splines::{DesignSystem, KnotSequence};

/// Largest number of constraints for which all faces are enumerated.
pub const MAX_ENUMERATED_CONSTRAINTS: usize = 16;

/// Optimal coefficients with multipliers and the active set used.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub b_hat: DVector<f64>,
    /// One multiplier per constraint, zero off the active set.
    pub chi: DVector<f64>,
    pub active: ActiveSet,
    /// `||Lambda b - ybar - D_m' chi||_inf`.
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
}

/// Individual KKT violations of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    /// Most negative constraint value (0 if none).
    pub primal: f64,
    /// Most negative multiplier (0 if none).
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    /// The tolerances every returned solution is expected to meet.
    pub fn passes(&self, ybar: &DVector<f64>) -> bool {
        self.primal >= -1e-10
            && self.dual >= -1e-10
            && self.complementarity <= 1e-8
            && self.stationarity <= 1e-8 * (1.0 + vec_inf_norm(ybar))
    }
}

pub fn kkt_report(
    lambda: &DMatrix<f64>,
    a: &DMatrix<f64>,
    ybar: &DVector<f64>,
    b: &DVector<f64>,
    chi: &DVector<f64>,
) -> KktReport {
    let ab = a * b;
    let resid = lambda * b - ybar - a.transpose() * chi;
    KktReport {
        stationarity: vec_inf_norm(&resid),
        primal: ab.iter().cloned().fold(0.0, f64::min),
        dual: chi.iter().cloned().fold(0.0, f64::min),
        complementarity: chi.dot(&ab).abs(),
    }
}

pub fn objective(lambda: &DMatrix<f64>, ybar: &DVector<f64>, b: &DVector<f64>) -> f64 {
    0.5 * b.dot(&(lambda * b)) - b.dot(ybar)
}

fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Minimiser on the face `{b : a_w b = 0}` and the multipliers of its rows.
fn face_solve(
    lambda: &DMatrix<f64>,
    a_w: &DMatrix<f64>,
    ybar: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if a_w.nrows() == 0 {
        return Ok((spd_solve(lambda, ybar)?, DVector::zeros(0)));
    }
    let split = row_space_split(a_w);
    let z = &split.null_basis;
    let reduced = z.transpose() * lambda * z;
    let b = z * spd_solve(&reduced, &(z.transpose() * ybar))?;
    let grad = lambda * &b - ybar;
    let chi = crate::linalg::solve_upper(&split.range_r, &(split.range_q.transpose() * grad))?;
    Ok((b, chi))
}

fn check_shapes(system: &DesignSystem, diffop: &DifferenceOperator, ybar: &DVector<f64>) -> Result<()> {
    let t_n = system.t_n();
    if diffop.constraint().ncols() != t_n || ybar.len() != t_n {
        return arg(format!(
            "dimension mismatch: Lambda is {t_n}x{t_n}, constraints have {} columns, ybar has {} entries",
            diffop.constraint().ncols(),
            ybar.len()
        ));
    }
    Ok(())
}

/// Primal active-set method started from the face with every constraint
/// active (where the minimiser is a polynomial and hence feasible).
pub fn solve_qp(
    system: &DesignSystem,
    diffop: &DifferenceOperator,
    ybar: &DVector<f64>,
) -> Result<QpSolution> {
    check_shapes(system, diffop, ybar)?;
    let lambda = &system.lambda;
    let a = diffop.constraint();
    let n_con = a.nrows();
    let k_n = n_con + 1;
    let cap = 10usize << (n_con.min(20));
    let a_scale = inf_norm(a).max(1.0);
    let mult_tol = 1e-11 * vec_inf_norm(ybar).max(1.0);

    let mut working: Vec<bool> = vec![true; n_con];
    let mut b = DVector::zeros(lambda.nrows());
    for iter in 1..=cap {
        let rows: Vec<usize> = (0..n_con).filter(|&i| working[i]).collect();
        let (b_face, chi_w) = face_solve(lambda, &select_rows(a, &rows), ybar)?;
        let step = &b_face - &b;
        let step_tol = 1e-12 * vec_inf_norm(&b_face).max(1.0);
        if vec_inf_norm(&step) <= step_tol {
            b = b_face;
            // drop the most negative multiplier, smallest index on ties
            let mut drop: Option<(usize, f64)> = None;
            for (pos, &c) in chi_w.iter().enumerate() {
                if c < -mult_tol && drop.is_none_or(|(_, best)| c < best) {
                    drop = Some((rows[pos], c));
                }
            }
            match drop {
                Some((i, _)) => working[i] = false,
                None => {
                    let mut chi = DVector::zeros(n_con);
                    for (pos, &i) in rows.iter().enumerate() {
                        chi[i] = chi_w[pos];
                    }
                    let kkt_residual = vec_inf_norm(&(lambda * &b - ybar - a.transpose() * &chi));
                    return Ok(QpSolution {
                        objective: objective(lambda, ybar, &b),
                        active: ActiveSet::from_flags(k_n, diffop.m, &working),
                        b_hat: b,
                        chi,
                        kkt_residual,
                        iterations: iter,
                    });
                }
            }
        } else {
            // ratio test over inactive constraints that the step decreases
            let act_tol = 1e-10 * a_scale * vec_inf_norm(&b).max(1.0);
            let ab = a * &b;
            let ap = a * &step;
            let mut t = 1.0;
            let mut blocking = None;
            for i in 0..n_con {
                if working[i] || ap[i] >= 0.0 {
                    continue;
                }
                if ab[i] + ap[i] >= -act_tol {
                    continue;
                }
                let ti = (-ab[i] / ap[i]).max(0.0);
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
            b += step * t;
            if let Some(i) = blocking {
                working[i] = true;
            }
        }
    }
    Err(Error::Cycling { iterations: cap })
}

/// Coefficients `F' (F Lambda F')^{-1} F ybar` for the face of `alpha`.
fn face_coefficients(
    f: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    ybar: &DVector<f64>,
) -> Result<DVector<f64>> {
    let inner = f * lambda * f.transpose();
    Ok(f.transpose() * spd_solve(&inner, &(f * ybar))?)
}

/// Exhaustive search over all active sets; the reference solution for
/// small problems.
pub fn brute_force_qp(
    system: &DesignSystem,
    diffop: &DifferenceOperator,
    ybar: &DVector<f64>,
    knots: &KnotSequence,
) -> Result<QpSolution> {
    check_shapes(system, diffop, ybar)?;
    let a = diffop.constraint();
    let n_con = a.nrows();
    if n_con > MAX_ENUMERATED_CONSTRAINTS {
        return arg(format!(
            "enumeration needs K-1 <= {MAX_ENUMERATED_CONSTRAINTS}, got {n_con}"
        ));
    }
    let m = diffop.m;
    let k_n = n_con + 1;
    let lambda = &system.lambda;
    let primal_tol = 1e-10 * inf_norm(a).max(1.0);
    let dual_tol = 1e-10 * vec_inf_norm(ybar).max(1.0);

    let mut best_feasible = f64::INFINITY;
    let mut accepted: Option<QpSolution> = None;
    for mask in 0..(1u64 << n_con) {
        let alpha = ActiveSet::from_mask(k_n, m, mask);
        let fs = build_f(&alpha, m, knots)?;
        let b = face_coefficients(fs.f(), lambda, ybar)?;
        let ab = a * &b;
        let scale = vec_inf_norm(&b).max(1.0);
        if ab.iter().any(|v| *v < -primal_tol * scale) {
            continue;
        }
        let obj = objective(lambda, ybar, &b);
        best_feasible = best_feasible.min(obj);
        let rows = alpha.alpha().iter().map(|i| i - 1).collect::<Vec<_>>();
        let grad = lambda * &b - ybar;
        let mut chi = DVector::zeros(n_con);
        if !rows.is_empty() {
            let split = row_space_split(&select_rows(a, &rows));
            let chi_w =
                crate::linalg::solve_upper(&split.range_r, &(split.range_q.transpose() * &grad))?;
            for (pos, &i) in rows.iter().enumerate() {
                chi[i] = chi_w[pos];
            }
        }
        if chi.iter().any(|c| *c < -dual_tol) {
            continue;
        }
        let kkt_residual = vec_inf_norm(&(grad - a.transpose() * &chi));
        if kkt_residual > 1e-8 * (1.0 + vec_inf_norm(ybar)) {
            continue;
        }
        if accepted.as_ref().is_none_or(|s| obj < s.objective) {
            accepted = Some(QpSolution {
                b_hat: b,
                chi,
                active: alpha,
                kkt_residual,
                objective: obj,
                iterations: mask as usize + 1,
            });
        }
    }
    let sol = accepted.ok_or_else(|| {
        Error::Inconsistent("no active set satisfies the optimality conditions".into())
    })?;
    if sol.objective > best_feasible + 1e-10 * best_feasible.abs().max(1.0) {
        return Err(Error::Inconsistent(format!(
            "accepted objective {} exceeds best feasible objective {}",
            sol.objective, best_feasible
        )));
    }
    Ok(sol)
}

/// One linear piece of the solution map, `ybar -> F' (F Lambda F')^{-1} F ybar`.
#[derive(Debug, Clone)]
pub struct LinearPiece {
    pub alpha: ActiveSet,
    pub map: DMatrix<f64>,
    pub inf_norm: f64,
    /// `||F'|| * ||K (Xi F Lambda F')^{-1}|| * ||K^{-1} Xi F||`, all in the
    /// infinity norm.
    pub three_factor_bound: f64,
}

/// `F' (F Lambda F')^{-1} F` for an arbitrary full-row-rank `F`.
pub fn piece_map(f: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inner = f * lambda * f.transpose();
    let chol = inner
        .cholesky()
        .ok_or_else(|| Error::Conditioning("face matrix is not positive definite".into()))?;
    Ok(f.transpose() * chol.solve(f))
}

pub fn linear_piece(
    alpha: &ActiveSet,
    system: &DesignSystem,
    m: usize,
    knots: &KnotSequence,
) -> Result<LinearPiece> {
    let fs = build_f(alpha, m, knots)?;
    let f = fs.f();
    let map = piece_map(f, &system.lambda)?;
    let k = knots.num_intervals() as f64;
    let mut xi_f = f.clone();
    scale_rows(&mut xi_f, fs.xi_top().as_slice());
    let middle = &xi_f * &system.lambda * f.transpose() / k;
    let middle_norm = crate::linalg::inv_inf_norm(&middle)?;
    let three_factor_bound = inf_norm(&f.transpose()) * middle_norm * inf_norm(&xi_f) / k;
    Ok(LinearPiece {
        alpha: alpha.clone(),
        inf_norm: inf_norm(&map),
        map,
        three_factor_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzMode {
    /// Maximum piece norm over every active set.
    Exact,
    /// Largest observed difference ratio over random data pairs.
    Probe { seed: u64, pairs: usize },
}

pub const DEFAULT_PROBE_PAIRS: usize = 10_000;

/// Sup-norm Lipschitz constant of `ybar -> b_hat(ybar)` for a fixed system.
pub fn lipschitz_constant(
    system: &DesignSystem,
    m: usize,
    knots: &KnotSequence,
    mode: LipschitzMode,
) -> Result<f64> {
    let k_n = knots.num_intervals();
    match mode {
        LipschitzMode::Exact => {
            if k_n - 1 > MAX_ENUMERATED_CONSTRAINTS {
                return arg(format!(
                    "exact mode needs K-1 <= {MAX_ENUMERATED_CONSTRAINTS}, got {}",
                    k_n - 1
                ));
            }
            let norms: Vec<f64> = (0..(1u64 << (k_n - 1)))
                .into_par_iter()
                .map(|mask| {
                    linear_piece(&ActiveSet::from_mask(k_n, m, mask), system, m, knots)
                        .map(|p| p.inf_norm)
                })
                .collect::<Result<_>>()?;
            Ok(norms.into_iter().fold(0.0, f64::max))
        }
        LipschitzMode::Probe { seed, pairs } => {
            let diffop = crate::shapeops::weighted_difference(m, knots)?;
            let t_n = system.t_n();
            let base = system.ybar.clone();
            let base_scale = vec_inf_norm(&base).max(1.0);
            let ratios: Vec<f64> = (0..pairs as u64)
                .into_par_iter()
                .map(|i| {
                    let mut s = Stream::new(seed, i);
                    let (u, v) = if i % 2 == 0 {
                        let u = DVector::from_fn(t_n, |_, _| s.uniform_in(-1.0, 1.0));
                        let v = DVector::from_fn(t_n, |_, _| s.uniform_in(-1.0, 1.0));
                        (u, v)
                    } else {
                        let eps = 0.05 * base_scale * s.uniform();
                        let u = &base + DVector::from_fn(t_n, |_, _| s.uniform_in(-eps, eps));
                        let v = &base + DVector::from_fn(t_n, |_, _| s.uniform_in(-eps, eps));
                        (u, v)
                    };
                    let bu = solve_qp(system, &diffop, &u)?.b_hat;
                    let bv = solve_qp(system, &diffop, &v)?.b_hat;
                    let den = vec_inf_norm(&(&u - &v));
                    Ok(if den > 0.0 {
                        vec_inf_norm(&(bu - bv)) / den
                    } else {
                        0.0
                    })
                })
                .collect::<Result<_>>()?;
            Ok(ratios.into_iter().fold(0.0, f64::max))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapeops::weighted_difference;
    use crate::splines::{build_design_system, DesignPoints};

    fn setup(m: usize, k: usize, n: usize, f: impl Fn(f64) -> f64) -> (DesignSystem, DifferenceOperator, KnotSequence) {
        let knots = KnotSequence::uniform(k).unwrap();
        let design = DesignPoints::uniform(n).unwrap();
        let y: Vec<f64> = design.points().iter().map(|x| f(*x)).collect();
        let sys = build_design_system(m, &knots, &design, &y).unwrap();
        let d = weighted_difference(m, &knots).unwrap();
        (sys, d, knots)
    }

    #[test]
    fn constant_data_is_reproduced() {
        for m in 1..=3 {
            let (sys, d, _) = setup(m, 5, 40, |_| 2.5);
            let sol = solve_qp(&sys, &d, &sys.ybar).unwrap();
            assert!(sol.b_hat.iter().all(|b| (b - 2.5).abs() < 1e-12));
            let expect = objective(&sys.lambda, &sys.ybar, &sol.b_hat);
            assert_eq!(sol.objective, expect);
        }
    }

    #[test]
    fn increasing_data_needs_no_constraints() {
        let (sys, d, _) = setup(1, 4, 200, |x| x + 0.1 * (3.0 * x).sin());
        let sol = solve_qp(&sys, &d, &sys.ybar).unwrap();
        assert!(sol.active.alpha().is_empty());
        let free = spd_solve(&sys.lambda, &sys.ybar).unwrap();
        assert!((sol.b_hat - free).abs().max() < 1e-12);
    }

    #[test]
    fn monotone_violation_matches_enumeration() {
        let (sys, d, knots) = setup(1, 3, 30, |x| if x < 0.5 { x } else { 0.8 - x });
        let a = solve_qp(&sys, &d, &sys.ybar).unwrap();
        let b = brute_force_qp(&sys, &d, &sys.ybar, &knots).unwrap();
        assert!((a.b_hat - b.b_hat).abs().max() < 1e-12);
        assert!(!a.active.alpha().is_empty());
    }

    #[test]
    fn empty_face_piece_is_inverse() {
        let (sys, _, knots) = setup(2, 5, 60, |x| x * x);
        let p = linear_piece(&ActiveSet::empty(5, 2), &sys, 2, &knots).unwrap();
        let inv = sys.lambda.clone().try_inverse().unwrap();
        assert!((&p.map - &inv).abs().max() < 1e-10);
        assert!(p.inf_norm <= p.three_factor_bound * (1.0 + 1e-12));
    }
}

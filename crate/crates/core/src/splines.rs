//! B-spline bases on clamped knot sequences over `[0, 1]` and the weighted
//! least-squares design system built from them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{arg, Error, Result};

/// Slack used when checking mesh-class inequalities on floating-point knots.
const MESH_SLACK: f64 = 1e-12;

/// Spline order `m` (degree `m - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SplineOrder(usize);

impl SplineOrder {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return arg("spline order must be at least 1");
        }
        Ok(SplineOrder(m))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Knots `0 = k_0 < k_1 < ... < k_K = 1` together with the mesh constants
/// `c1, c2` such that every gap lies in `[c1 / K, c2 / K]`.
///
/// Knots outside `0..=K` follow the clamped extension: index `< 0` reads as
/// `0`, index `> K` reads as `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSequence {
    points: Vec<f64>,
    c_kappa_1: f64,
    c_kappa_2: f64,
}

fn check_unit_partition(points: &[f64], what: &str) -> Result<()> {
    if points.len() < 2 {
        return arg(format!("{what} needs at least two points"));
    }
    if points[0] != 0.0 || *points.last().unwrap() != 1.0 {
        return arg(format!("{what} must start at 0 and end at 1"));
    }
    if let Some(i) = points.windows(2).position(|w| !(w[1] > w[0])) {
        return arg(format!(
            "{what} must be strictly increasing (positions {} and {})",
            i,
            i + 1
        ));
    }
    Ok(())
}

impl KnotSequence {
    /// Knots validated against the mesh class with constants `c1 <= 1 <= c2`.
    pub fn new(points: Vec<f64>, c_kappa_1: f64, c_kappa_2: f64) -> Result<Self> {
        if !(c_kappa_1 > 0.0 && c_kappa_1 <= 1.0 && c_kappa_2 >= 1.0) {
            return arg(format!(
                "mesh constants must satisfy 0 < c1 <= 1 <= c2 (got c1={c_kappa_1}, c2={c_kappa_2})"
            ));
        }
        check_unit_partition(&points, "knot sequence")?;
        let k = (points.len() - 1) as f64;
        for (i, w) in points.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap < (c_kappa_1 - MESH_SLACK) / k || gap > (c_kappa_2 + MESH_SLACK) / k {
                return arg(format!(
                    "knot gap {} (interval {}) outside [{c_kappa_1}/K, {c_kappa_2}/K] with K={}",
                    gap,
                    i + 1,
                    k
                ));
            }
        }
        Ok(KnotSequence {
            points,
            c_kappa_1,
            c_kappa_2,
        })
    }

    /// Knots checked only for ordering; the mesh constants are set to the
    /// tightest values the sequence satisfies.
    pub fn from_breakpoints(points: Vec<f64>) -> Result<Self> {
        check_unit_partition(&points, "knot sequence")?;
        let k = (points.len() - 1) as f64;
        let (lo, hi) = points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), g| (lo.min(g), hi.max(g)));
        Ok(KnotSequence {
            points,
            c_kappa_1: (k * lo).min(1.0),
            c_kappa_2: (k * hi).max(1.0),
        })
    }

    /// Equally spaced knots `i / K`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return arg("number of knot intervals must be at least 1");
        }
        let mut points: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        points[k] = 1.0;
        KnotSequence::new(points, 1.0, 1.0)
    }

    /// Number of intervals `K`.
    pub fn num_intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn c_kappa_1(&self) -> f64 {
        self.c_kappa_1
    }

    pub fn c_kappa_2(&self) -> f64 {
        self.c_kappa_2
    }

    /// Knot `k_j` under the clamped extension.
    pub fn knot(&self, j: isize) -> f64 {
        if j <= 0 {
            0.0
        } else if j as usize >= self.points.len() - 1 {
            1.0
        } else {
            self.points[j as usize]
        }
    }

    /// 1-based index `r` of the interval `[k_{r-1}, k_r)` containing `x`;
    /// `x = 1` belongs to the last (closed) interval.
    pub fn interval_of(&self, x: f64) -> usize {
        let k = self.num_intervals();
        // number of interior knots k_1..k_{K-1} that are <= x
        let r = self.points[1..k].partition_point(|&t| t <= x);
        r + 1
    }

    /// Number of B-splines of order `p` on these knots.
    pub fn basis_len(&self, p: usize) -> usize {
        self.num_intervals() + p - 1
    }
}

fn check_x(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("evaluation point {x} outside [0, 1]")));
    }
    Ok(())
}

/// The `p` possibly nonzero values `B_{p,r}(x) .. B_{p,r+p-1}(x)` where `r`
/// is the interval of `x`. Returns `(r - 1, values)`, i.e. the 0-based index
/// of the first entry.
pub(crate) fn nonzero_basis(p: usize, knots: &KnotSequence, x: f64) -> (usize, Vec<f64>) {
    let r = knots.interval_of(x) as isize;
    let mut vals = vec![1.0];
    for q in 2..=p {
        let qi = q as isize;
        let mut next = vec![0.0; q];
        for (t, slot) in next.iter_mut().enumerate() {
            let k = r + t as isize;
            let mut v = 0.0;
            if t >= 1 {
                let lo = knots.knot(k - qi);
                let den = knots.knot(k - 1) - lo;
                if den > 0.0 {
                    v += (x - lo) / den * vals[t - 1];
                }
            }
            if t + 1 < q {
                let hi = knots.knot(k);
                let den = hi - knots.knot(k - qi + 1);
                if den > 0.0 {
                    v += (hi - x) / den * vals[t];
                }
            }
            *slot = v;
        }
        vals = next;
    }
    ((r - 1) as usize, vals)
}

/// All `K + p - 1` B-splines of order `p` at `x`.
pub fn eval_basis(p: usize, knots: &KnotSequence, x: f64) -> Result<Vec<f64>> {
    if p == 0 {
        return arg("spline order must be at least 1");
    }
    check_x(x)?;
    let mut out = vec![0.0; knots.basis_len(p)];
    let (first, vals) = nonzero_basis(p, knots, x);
    out[first..first + p].copy_from_slice(&vals);
    Ok(out)
}

/// Derivatives of the order-`p` B-splines at `x` via the order-`p - 1`
/// recursion. At a kink the right limit is returned (left limit at `x = 1`).
pub fn eval_basis_derivative(p: usize, knots: &KnotSequence, x: f64) -> Result<Vec<f64>> {
    if p < 2 {
        return arg("derivatives are defined for spline order p >= 2");
    }
    check_x(x)?;
    let n = knots.basis_len(p);
    let (first, lower) = nonzero_basis(p - 1, knots, x);
    // lower-order value by 0-based index; zero outside the support window
    let lower_at = |idx: isize| -> f64 {
        if idx < first as isize || idx >= (first + p - 1) as isize {
            0.0
        } else {
            lower[(idx - first as isize) as usize]
        }
    };
    let scale = (p - 1) as f64;
    let pi = p as isize;
    let mut out = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let k = i as isize + 1;
        let mut v = 0.0;
        // B_{p-1,k-1} exists for k-1 >= 1
        if k >= 2 {
            let den = knots.knot(k - 1) - knots.knot(k - pi);
            if den > 0.0 {
                v += scale / den * lower_at(k - 2);
            }
        }
        // B_{p-1,k} exists for k <= K + p - 2
        if (k as usize) < n {
            let den = knots.knot(k) - knots.knot(k - pi + 1);
            if den > 0.0 {
                v -= scale / den * lower_at(k - 1);
            }
        }
        *slot = v;
    }
    Ok(out)
}

/// `L1` norm of the B-spline with 0-based index `idx` (that is, `B_{p,idx+1}`),
/// equal to `(k_{idx+1} - k_{idx+1-p}) / p`.
pub fn l1_norm(p: usize, knots: &KnotSequence, idx: usize) -> Result<f64> {
    if p == 0 {
        return arg("spline order must be at least 1");
    }
    if idx >= knots.basis_len(p) {
        return arg(format!(
            "basis index {idx} out of range for {} splines",
            knots.basis_len(p)
        ));
    }
    let k = idx as isize + 1;
    Ok((knots.knot(k) - knots.knot(k - p as isize)) / p as f64)
}

/// Evaluate `sum_k coef[k] B_{p,k}(x)`.
pub fn eval_spline(p: usize, knots: &KnotSequence, coef: &[f64], x: f64) -> Result<f64> {
    if coef.len() != knots.basis_len(p) {
        return arg(format!(
            "expected {} coefficients, got {}",
            knots.basis_len(p),
            coef.len()
        ));
    }
    check_x(x)?;
    let (first, vals) = nonzero_basis(p, knots, x);
    Ok(vals.iter().zip(&coef[first..]).map(|(b, c)| b * c).sum())
}

/// Design points `0 = x_0 < ... < x_n = 1` with gaps at most `c_omega / n`.
///
/// Point `i` carries weight `x_{i+1} - x_i` with `x_{n+1} := 1`, so the last
/// point always has weight zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoints {
    points: Vec<f64>,
    c_omega: f64,
    weights: Vec<f64>,
}

fn design_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len() - 1;
    (0..=n)
        .map(|i| if i < n { points[i + 1] - points[i] } else { 1.0 - points[n] })
        .collect()
}

impl DesignPoints {
    pub fn new(points: Vec<f64>, c_omega: f64) -> Result<Self> {
        if c_omega < 1.0 {
            return arg(format!("c_omega must be >= 1 (got {c_omega})"));
        }
        check_unit_partition(&points, "design")?;
        let n = (points.len() - 1) as f64;
        for (i, w) in points.windows(2).enumerate() {
            if w[1] - w[0] > (c_omega + MESH_SLACK) / n {
                return arg(format!(
                    "design gap {} (between points {} and {}) exceeds c_omega/n = {}",
                    w[1] - w[0],
                    i,
                    i + 1,
                    c_omega / n
                ));
            }
        }
        let weights = design_weights(&points);
        Ok(DesignPoints {
            points,
            c_omega,
            weights,
        })
    }

    /// Ordering checks only; `c_omega` is the tightest admissible value.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        check_unit_partition(&points, "design")?;
        let n = (points.len() - 1) as f64;
        let max_gap = points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let weights = design_weights(&points);
        Ok(DesignPoints {
            points,
            c_omega: (n * max_gap).max(1.0),
            weights,
        })
    }

    /// `x_i = i / n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return arg("design needs n >= 1");
        }
        let mut points: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        points[n] = 1.0;
        DesignPoints::new(points, 1.0)
    }

    /// `n` (there are `n + 1` points).
    pub fn n(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn c_omega(&self) -> f64 {
        self.c_omega
    }
}

/// Weighted least-squares system for order-`m` splines on `knots` sampled at
/// `design`.
#[derive(Debug, Clone)]
pub struct DesignSystem {
    pub m: usize,
    pub k_n: usize,
    /// `(n+1) x T_n`, entry `(i, k)` is `B_{m,k+1}(x_i)`.
    pub xhat: DMatrix<f64>,
    /// Diagonal of the weight matrix.
    pub theta: DVector<f64>,
    /// `K_n * Xhat^T Theta Xhat`.
    pub lambda: DMatrix<f64>,
    /// `K_n * Xhat^T Theta y`.
    pub ybar: DVector<f64>,
}

impl DesignSystem {
    /// `K_n * Xhat^T Theta v` for another sample vector `v`.
    pub fn weighted_data(&self, v: &[f64]) -> Result<DVector<f64>> {
        if v.len() != self.xhat.nrows() {
            return arg(format!(
                "sample vector has {} entries, design has {}",
                v.len(),
                self.xhat.nrows()
            ));
        }
        let mut out = DVector::zeros(self.xhat.ncols());
        for (i, row) in self.xhat.row_iter().enumerate() {
            let w = self.k_n as f64 * self.theta[i] * v[i];
            if w == 0.0 {
                continue;
            }
            for (k, b) in row.iter().enumerate() {
                if *b != 0.0 {
                    out[k] += w * b;
                }
            }
        }
        Ok(out)
    }

    /// Number of coefficients `T_n = K_n + m - 1`.
    pub fn t_n(&self) -> usize {
        self.lambda.nrows()
    }
}

/// Assemble `Xhat`, `Theta`, `Lambda` and `ybar`.
pub fn build_design_system(
    m: usize,
    knots: &KnotSequence,
    design: &DesignPoints,
    y: &[f64],
) -> Result<DesignSystem> {
    if m == 0 {
        return arg("spline order must be at least 1");
    }
    let rows = design.n() + 1;
    if y.len() != rows {
        return arg(format!(
            "sample vector has {} entries, design has {rows}",
            y.len()
        ));
    }
    let k_n = knots.num_intervals();
    let t_n = knots.basis_len(m);
    let kf = k_n as f64;
    let mut xhat = DMatrix::zeros(rows, t_n);
    let mut lambda = DMatrix::zeros(t_n, t_n);
    let mut ybar = DVector::zeros(t_n);
    for (i, (&x, &w)) in design.points().iter().zip(design.weights()).enumerate() {
        let (first, vals) = nonzero_basis(m, knots, x);
        for (a, va) in vals.iter().enumerate() {
            xhat[(i, first + a)] = *va;
            ybar[first + a] += kf * w * va * y[i];
            for (b, vb) in vals.iter().enumerate() {
                lambda[(first + a, first + b)] += kf * w * (va * vb);
            }
        }
    }
    let theta = DVector::from_column_slice(design.weights());
    check_conditioning(&lambda)?;
    Ok(DesignSystem {
        m,
        k_n,
        xhat,
        theta,
        lambda,
        ybar,
    })
}

fn check_conditioning(lambda: &DMatrix<f64>) -> Result<()> {
    let trace = lambda.trace();
    let eig = SymmetricEigen::new(lambda.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * trace) {
        return Err(Error::Conditioning(format!(
            "Gram matrix is numerically singular (min eigenvalue {min:.3e}, trace {trace:.3e}); \
             use more design points per knot interval"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_is_an_indicator() {
        let knots = KnotSequence::uniform(4).unwrap();
        assert_eq!(eval_basis(1, &knots, 0.3).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(eval_basis(1, &knots, 0.5).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(eval_basis(1, &knots, 1.0).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn left_endpoint_is_clamped() {
        let knots = KnotSequence::new(vec![0.0, 0.3, 0.55, 0.8, 1.0], 0.5, 1.5).unwrap();
        for p in 1..=5 {
            let b = eval_basis(p, &knots, 0.0).unwrap();
            assert_eq!(b[0], 1.0);
            assert!(b[1..].iter().all(|v| *v == 0.0));
            let b = eval_basis(p, &knots, 1.0).unwrap();
            assert!((b[b.len() - 1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hat_function_slopes() {
        let knots = KnotSequence::uniform(4).unwrap();
        let d = eval_basis_derivative(2, &knots, 0.3).unwrap();
        assert_eq!(d.len(), 5);
        assert!((d[1] + 4.0).abs() < 1e-12);
        assert!((d[2] - 4.0).abs() < 1e-12);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[3], 0.0);
        assert_eq!(d[4], 0.0);
    }

    #[test]
    fn argument_errors() {
        let knots = KnotSequence::uniform(3).unwrap();
        assert!(matches!(eval_basis(2, &knots, 1.2), Err(Error::Domain(_))));
        assert!(matches!(eval_basis(0, &knots, 0.2), Err(Error::Argument(_))));
        assert!(matches!(
            eval_basis_derivative(1, &knots, 0.2),
            Err(Error::Argument(_))
        ));
        assert!(l1_norm(2, &knots, 4).is_err());
        assert!(KnotSequence::new(vec![0.0, 0.1, 1.0], 0.5, 1.5).is_err());
        assert!(KnotSequence::new(vec![0.0, 0.6, 0.5, 1.0], 0.5, 1.5).is_err());
        assert!(DesignPoints::new(vec![0.0, 0.9, 1.0], 1.0).is_err());
    }

    #[test]
    fn l1_norms_by_hand() {
        let knots = KnotSequence::uniform(4).unwrap();
        assert!((l1_norm(2, &knots, 2).unwrap() - 0.25).abs() < 1e-15);
        assert!((l1_norm(2, &knots, 0).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn last_design_point_has_zero_weight() {
        let d = DesignPoints::uniform(8).unwrap();
        assert_eq!(d.weights()[8], 0.0);
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_data_gives_zero_ybar() {
        let knots = KnotSequence::uniform(3).unwrap();
        let design = DesignPoints::uniform(20).unwrap();
        let sys = build_design_system(2, &knots, &design, &[0.0; 21]).unwrap();
        assert!(sys.ybar.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_interval_is_rejected() {
        // no design point falls in (0.4, 0.6) so the middle order-1 spline is unseen
        let knots = KnotSequence::from_breakpoints(vec![0.0, 0.45, 0.55, 1.0]).unwrap();
        let design = DesignPoints::from_points(vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0]).unwrap();
        let err = build_design_system(1, &knots, &design, &[0.0; 8]).unwrap_err();
        assert!(matches!(err, Error::Conditioning(_)));
    }
}

//! The shape-constrained B-spline estimator and its noise-free counterpart.

use nalgebra::DVector;

use crate::error::{arg, Result};
use crate::qp::{solve_qp, QpSolution};
use crate::shapeops::{is_shape_feasible, weighted_difference, ActiveSet, DifferenceOperator};
use crate::splines::{build_design_system, eval_spline, DesignPoints, DesignSystem, KnotSequence, SplineOrder};

/// Grid size used for sup-norm estimates unless the caller asks otherwise.
pub const DEFAULT_GRID: usize = 1001;

/// A fitted spline `x -> sum_k b_k B_{m,k}(x)`.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: DVector<f64>,
    pub knots: KnotSequence,
    pub m: SplineOrder,
    pub active: ActiveSet,
    pub chi: DVector<f64>,
    pub objective: f64,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> Result<f64> {
        eval_spline(self.m.get(), &self.knots, self.coefficients.as_slice(), x)
    }

    /// Values on `grid_size` equally spaced points including both ends.
    pub fn eval_grid(&self, grid_size: usize) -> Result<Vec<(f64, f64)>> {
        uniform_grid(grid_size)?
            .into_iter()
            .map(|x| self.eval(x).map(|v| (x, v)))
            .collect()
    }

    pub fn is_shape_feasible(&self) -> bool {
        is_shape_feasible(self.m.get(), &self.knots, self.coefficients.as_slice()).unwrap_or(false)
    }

    fn from_solution(sol: QpSolution, knots: &KnotSequence, m: usize) -> Self {
        FitResult {
            coefficients: sol.b_hat,
            knots: knots.clone(),
            m: SplineOrder::new(m).expect("order validated by the design system"),
            active: sol.active,
            chi: sol.chi,
            objective: sol.objective,
        }
    }
}

fn uniform_grid(grid_size: usize) -> Result<Vec<f64>> {
    if grid_size < 2 {
        return arg("grid size must be at least 2");
    }
    let last = (grid_size - 1) as f64;
    Ok((0..grid_size)
        .map(|g| if g + 1 == grid_size { 1.0 } else { g as f64 / last })
        .collect())
}

/// A design system plus its constraint operator, reusable across data sets
/// on the same design and knots.
#[derive(Debug, Clone)]
pub struct Problem {
    pub m: usize,
    pub knots: KnotSequence,
    pub system: DesignSystem,
    pub diffop: DifferenceOperator,
}

impl Problem {
    pub fn new(m: usize, knots: &KnotSequence, design: &DesignPoints) -> Result<Self> {
        let zeros = vec![0.0; design.n() + 1];
        let system = build_design_system(m, knots, design, &zeros)?;
        let diffop = weighted_difference(m, knots)?;
        Ok(Problem {
            m,
            knots: knots.clone(),
            system,
            diffop,
        })
    }

    /// Fit to samples taken at the design points.
    pub fn fit(&self, y: &[f64]) -> Result<FitResult> {
        let ybar = self.system.weighted_data(y)?;
        self.fit_weighted(&ybar)
    }

    /// Fit given the weighted data vector directly.
    pub fn fit_weighted(&self, ybar: &DVector<f64>) -> Result<FitResult> {
        let sol = solve_qp(&self.system, &self.diffop, ybar)?;
        Ok(FitResult::from_solution(sol, &self.knots, self.m))
    }
}

/// Shape-constrained least-squares fit of `y` observed at `design`.
pub fn fit(m: usize, knots: &KnotSequence, design: &DesignPoints, y: &[f64]) -> Result<FitResult> {
    let system = build_design_system(m, knots, design, y)?;
    let diffop = weighted_difference(m, knots)?;
    let sol = solve_qp(&system, &diffop, &system.ybar)?;
    Ok(FitResult::from_solution(sol, knots, m))
}

/// The constrained projection of noise-free values `f(x_i)`; the fit the
/// estimator would return without noise.
pub fn project_noise_free(
    m: usize,
    knots: &KnotSequence,
    design: &DesignPoints,
    f_values: &[f64],
) -> Result<FitResult> {
    fit(m, knots, design, f_values)
}

/// `max |fit(x) - f(x)|` over a uniform grid including both endpoints.
pub fn sup_error(fit: &FitResult, f: impl Fn(f64) -> f64, grid_size: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in uniform_grid(grid_size)? {
        worst = worst.max((fit.eval(x)? - f(x)).abs());
    }
    Ok(worst)
}

/// `max |a(x) - b(x)|` between two fits over a uniform grid.
pub fn sup_distance(a: &FitResult, b: &FitResult, grid_size: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in uniform_grid(grid_size)? {
        worst = worst.max((a.eval(x)? - b.eval(x)?).abs());
    }
    Ok(worst)
}

/// Number of grid-level shape violations: decreasing steps for `m = 1`
/// (slack `1e-9`) and negative second differences for `m = 2` (slack
/// `1e-6`). Higher orders are checked only through the coefficients.
pub fn grid_shape_violations(fit: &FitResult, grid_size: usize) -> Result<usize> {
    let vals: Vec<f64> = fit.eval_grid(grid_size)?.into_iter().map(|(_, v)| v).collect();
    let count = match fit.m.get() {
        1 => vals.windows(2).filter(|w| w[1] - w[0] < -1e-9).count(),
        2 => vals
            .windows(3)
            .filter(|w| w[2] - 2.0 * w[1] + w[0] < -1e-6)
            .count(),
        _ => 0,
    };
    Ok(count)
}

/// Hölder smoothness `(r, L)` of a truth function; `gamma = r - (m - 1)`
/// with `m = ceil(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderSpec {
    pub r: f64,
    pub l: f64,
    pub gamma: f64,
}

impl HolderSpec {
    pub fn new(r: f64, l: f64) -> Result<Self> {
        if !(r > 0.0 && l > 0.0) {
            return arg(format!("Hölder exponent and constant must be positive (r={r}, L={l})"));
        }
        let m = r.ceil();
        Ok(HolderSpec {
            r,
            l,
            gamma: r - (m - 1.0),
        })
    }

    pub fn m(&self) -> usize {
        self.r.ceil() as usize
    }
}

//! Bias, stochastic-error and total-risk rate experiments.

use rayon::prelude::*;
use serde::Serialize;

use super::catalog::{truth_by_name, Truth};
use super::lipschitz::Mesh;
use super::records::ResultRecord;
use super::{sample_design, sample_knots, simulate_with};
use crate::error::{arg, Result};
use crate::estimator::{grid_shape_violations, project_noise_free, sup_distance, sup_error, Problem, DEFAULT_GRID};
use crate::rng::Stream;
use crate::splines::{DesignPoints, KnotSequence};

const EXPERIMENT: &str = "rates";

/// Tolerance on fitted log-log slopes.
pub const SLOPE_TOL: f64 = 0.3;
/// Fewer cells than this and a slope outside tolerance is flagged, not failed.
pub const MIN_CELLS_FOR_VERDICT: usize = 4;
/// Slack allowed in the replicate-wise triangle inequality.
const TRIANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Bias,
    Stochastic,
    Total,
}

impl RateKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bias" => Ok(RateKind::Bias),
            "stochastic" => Ok(RateKind::Stochastic),
            "total" => Ok(RateKind::Total),
            _ => arg(format!("unknown rate kind '{s}' (bias, stochastic, total)")),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RateKind::Bias => "bias",
            RateKind::Stochastic => "stochastic",
            RateKind::Total => "total",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateConfig {
    pub kind: RateKind,
    pub m: usize,
    pub truth: String,
    /// `(n, K)` pairs, one per cell.
    pub cells: Vec<(usize, usize)>,
    pub sigma: f64,
    pub replicates: usize,
    pub seed: u64,
    pub mesh: Mesh,
    pub c_kappa_1: f64,
    pub c_kappa_2: f64,
    pub c_omega: f64,
    /// Sup norms are taken over `max(grid, 32 K + 1)` equally spaced points.
    pub grid: usize,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            kind: RateKind::Bias,
            m: 1,
            truth: "linear".into(),
            cells: [4, 8, 16, 32].iter().map(|&k| (64 * k, k)).collect(),
            sigma: 0.0,
            replicates: 1,
            seed: 1,
            mesh: Mesh::Uniform,
            c_kappa_1: super::DEFAULT_C_KAPPA_1,
            c_kappa_2: super::DEFAULT_C_KAPPA_2,
            c_omega: super::DEFAULT_C_OMEGA,
            grid: DEFAULT_GRID,
        }
    }
}

/// `K = ceil((n / log n)^(1/q))` for each `n`.
pub fn schedule(n_list: &[usize], q: f64) -> Result<Vec<(usize, usize)>> {
    if !(q > 0.0) {
        return arg(format!("schedule exponent must be positive, got {q}"));
    }
    n_list
        .iter()
        .map(|&n| {
            if n < 3 {
                return arg(format!("schedule needs n >= 3, got {n}"));
            }
            let nf = n as f64;
            Ok((n, ((nf / nf.ln()).powf(1.0 / q)).ceil() as usize))
        })
        .collect()
}

/// Rate predictor for a cell: `K^-gamma`, `sqrt(K log n / n)`, or their sum.
pub fn predictor(kind: RateKind, gamma: f64, n: usize, k: usize) -> f64 {
    let bias = (k as f64).powf(-gamma);
    let stoch = (k as f64 * (n as f64).ln() / n as f64).sqrt();
    match kind {
        RateKind::Bias => bias,
        RateKind::Stochastic => stoch,
        RateKind::Total => bias + stoch,
    }
}

/// Measurements for one `(n, K)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCell {
    pub n: usize,
    pub k: usize,
    /// `sup |f - fbar|`.
    pub bias: f64,
    /// Replicate mean of `sup |fhat - fbar|` (zero for the bias kind).
    pub mean_stochastic: f64,
    /// Replicate mean of `sup |fhat - f|` (equals `bias` for the bias kind).
    pub mean_total: f64,
    /// Number of fits (noise-free projection included).
    pub fits: usize,
    pub shape_violations: usize,
    pub triangle_violations: usize,
}

impl RateCell {
    pub fn error(&self, kind: RateKind) -> f64 {
        match kind {
            RateKind::Bias => self.bias,
            RateKind::Stochastic => self.mean_stochastic,
            RateKind::Total => self.mean_total,
        }
    }
}

fn cell_meshes(cfg: &RateConfig, cell: usize, n: usize, k: usize) -> Result<(KnotSequence, DesignPoints)> {
    match cfg.mesh {
        Mesh::Uniform => Ok((KnotSequence::uniform(k)?, DesignPoints::uniform(n)?)),
        Mesh::Random => {
            let mut rng = Stream::new(cfg.seed, ((cell as u64) << 32) | u32::MAX as u64);
            let knots = sample_knots(k, cfg.c_kappa_1, cfg.c_kappa_2, &mut rng)?;
            let design = sample_design(n, cfg.c_omega, &mut rng)?;
            Ok((knots, design))
        }
    }
}

fn count_violations(fit: &crate::estimator::FitResult, grid: usize) -> Result<usize> {
    Ok(grid_shape_violations(fit, grid)? + usize::from(!fit.is_shape_feasible()))
}

/// Run one cell. Replicate `r` draws its noise from stream
/// `(seed, (cell << 32) | r)`.
pub fn rate_cell(cfg: &RateConfig, truth: &Truth, cell: usize, n: usize, k: usize) -> Result<RateCell> {
    if k >= n {
        return arg(format!("cell {cell}: K={k} must be below n={n}"));
    }
    let (knots, design) = cell_meshes(cfg, cell, n, k)?;
    let grid = cfg.grid.max(32 * k + 1);
    let f_values: Vec<f64> = design.points().iter().map(|&x| truth.eval(x)).collect();
    let fbar = project_noise_free(cfg.m, &knots, &design, &f_values)?;
    let bias = sup_error(&fbar, |x| truth.eval(x), grid)?;
    let base_violations = count_violations(&fbar, grid)?;
    if cfg.kind == RateKind::Bias {
        return Ok(RateCell {
            n,
            k,
            bias,
            mean_stochastic: 0.0,
            mean_total: bias,
            fits: 1,
            shape_violations: base_violations,
            triangle_violations: 0,
        });
    }
    let problem = Problem::new(cfg.m, &knots, &design)?;
    let reps: Vec<(f64, f64, usize, bool)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = Stream::new(cfg.seed, ((cell as u64) << 32) | r as u64);
            let y = simulate_with(|x| truth.eval(x), &design, cfg.sigma, &mut rng)?;
            let fhat = problem.fit(&y)?;
            let stoch = sup_distance(&fhat, &fbar, grid)?;
            let total = sup_error(&fhat, |x| truth.eval(x), grid)?;
            let viol = count_violations(&fhat, grid)?;
            Ok((stoch, total, viol, total <= bias + stoch + TRIANGLE_SLACK))
        })
        .collect::<Result<_>>()?;
    let count = reps.len() as f64;
    Ok(RateCell {
        n,
        k,
        bias,
        mean_stochastic: reps.iter().map(|r| r.0).sum::<f64>() / count,
        mean_total: reps.iter().map(|r| r.1).sum::<f64>() / count,
        fits: 1 + reps.len(),
        shape_violations: base_violations + reps.iter().map(|r| r.2).sum::<usize>(),
        triangle_violations: reps.iter().filter(|r| !r.3).count(),
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn validate(cfg: &RateConfig) -> Result<Truth> {
    if cfg.cells.len() < 3 {
        return arg(format!("rate experiments need at least 3 cells, got {}", cfg.cells.len()));
    }
    if cfg.replicates == 0 {
        return arg("replicates must be at least 1");
    }
    if !(cfg.sigma >= 0.0) {
        return arg(format!("sigma must be nonnegative, got {}", cfg.sigma));
    }
    if cfg.kind != RateKind::Bias && cfg.sigma == 0.0 {
        return arg("noisy rate kinds need sigma > 0");
    }
    if let Some(&(n, k)) = cfg.cells.iter().find(|&&(n, k)| k == 0 || k >= n) {
        return arg(format!("every cell needs 1 <= K < n (n={n}, K={k})"));
    }
    let truth = truth_by_name(&cfg.truth)?;
    if truth.m < cfg.m {
        return arg(format!("truth '{}' has shape order {} but m={}", truth.name, truth.m, cfg.m));
    }
    Ok(truth)
}

pub fn rate_experiment(cfg: &RateConfig) -> Result<Vec<ResultRecord>> {
    let truth = validate(cfg)?;
    let gamma = truth.holder().gamma;
    let kind = cfg.kind;
    let results: Vec<Result<RateCell>> = super::install(|| {
        cfg.cells
            .iter()
            .enumerate()
            .map(|(cell, &(n, k))| rate_cell(cfg, &truth, cell, n, k))
            .collect()
    });

    let mut records = Vec::new();
    let mut points = Vec::new();
    for (cell, (res, &(n, k))) in results.into_iter().zip(&cfg.cells).enumerate() {
        let params = format!(
            "kind={} m={} truth={} n={n} K={k} sigma={} replicates={}",
            kind.as_str(),
            cfg.m,
            truth.name,
            cfg.sigma,
            cfg.replicates
        );
        let c = match res {
            Ok(c) => c,
            Err(e) => {
                records.push(ResultRecord::error(EXPERIMENT, cell, "rate-error", params, &e));
                continue;
            }
        };
        let pred = predictor(kind, gamma, n, k);
        let err = c.error(kind);
        records.push(
            ResultRecord::info(EXPERIMENT, cell, "rate-error", params.clone(), err)
                .with_detail(format!("predictor={}", super::records::fmt_float(pred))),
        );
        records.push(
            ResultRecord::upper(EXPERIMENT, cell, "shape-preservation", params.clone(), c.shape_violations as f64, 0.0)
                .exact()
                .with_detail(format!("fits={}", c.fits)),
        );
        if kind != RateKind::Bias {
            records.push(
                ResultRecord::upper(EXPERIMENT, cell, "risk-decomposition", params, c.triangle_violations as f64, 0.0)
                    .exact(),
            );
        }
        points.push((n, k, pred, err));
    }

    let cell = cfg.cells.len();
    let summary = format!("kind={} m={} truth={} cells={}", kind.as_str(), cfg.m, truth.name, points.len());
    if points.len() < 3 {
        records.push(ResultRecord::info(EXPERIMENT, cell, "rate-slope", summary, f64::NAN)
            .with_detail("too few successful cells"));
        return Ok(records);
    }
    if points.iter().any(|p| !(p.3 > 0.0)) {
        // the truth is representable on every grid; no rate to fit
        records.push(
            ResultRecord::info(EXPERIMENT, cell, "rate-slope", summary, f64::NAN)
                .with_detail(format!("max error {}", super::records::fmt_float(points.iter().map(|p| p.3).fold(0.0, f64::max)))),
        );
        return Ok(records);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.2.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.3.ln()).collect();
    let mut rec = ResultRecord::within(EXPERIMENT, cell, "rate-slope", summary.clone(), ls_slope(&xs, &ys), 1.0, SLOPE_TOL);
    if points.len() < MIN_CELLS_FOR_VERDICT {
        rec = rec.flagged();
    }
    records.push(rec);
    let ks: Vec<f64> = points.iter().map(|p| (p.1 as f64).ln()).collect();
    records.push(ResultRecord::info(EXPERIMENT, cell + 1, "rate-slope-vs-knots", summary, ls_slope(&ks, &ys)));
    Ok(records)
}

/// Ratio of mean errors between two cells against the ratio of predictors;
/// passes when the measured ratio is within `factor` of the prediction.
pub fn ratio_record(kind: RateKind, gamma: f64, a: &RateCell, b: &RateCell, factor: f64, cell: usize) -> ResultRecord {
    let measured = b.error(kind) / a.error(kind);
    let predicted = predictor(kind, gamma, b.n, b.k) / predictor(kind, gamma, a.n, a.k);
    let params = format!("kind={} n={}/{} K={}/{}", kind.as_str(), b.n, a.n, b.k, a.k);
    // within a factor means |log(measured / predicted)| <= log(factor)
    ResultRecord::within(EXPERIMENT, cell, "rate-ratio", params, (measured / predicted).ln(), 0.0, factor.ln())
        .with_detail(format!(
            "measured={} predicted={}",
            super::records::fmt_float(measured),
            super::records::fmt_float(predicted)
        ))
}

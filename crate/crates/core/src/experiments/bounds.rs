//! Certification of the matrix identities and bounds behind the uniform
//! Lipschitz property on random instances.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::records::ResultRecord;
use super::{sample_design, sample_knots};
use crate::error::{arg, Result};
use crate::linalg::{inf_norm, inv_inf_norm, min_singular_value, rank, scale_rows};
use crate::rng::Stream;
use crate::shapeops::{
    build_f, build_z_h, gramian, limit_gramians, refinement_grid, v_alpha_knots,
    weighted_difference, x_final, ActiveSet, ZStages,
};
use crate::splines::{build_design_system, eval_basis, nonzero_basis, DesignPoints, KnotSequence};

const EXPERIMENT: &str = "bounds";

#[derive(Debug, Clone, Serialize)]
pub struct BoundConfig {
    pub m: usize,
    pub max_k: usize,
    pub seed: u64,
    /// Random instances for the factor and design-Gramian checks.
    pub samples: usize,
    /// Instances for the grid checks (each costs `O(L)`).
    pub grid_samples: usize,
    /// Sample size for the design-Gramian check.
    pub n: usize,
    pub c_kappa_1: f64,
    pub c_kappa_2: f64,
    pub c_omega: f64,
    pub j_values: Vec<usize>,
    /// Largest grid size used by the grid checks.
    pub max_grid: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            m: 2,
            max_k: 8,
            seed: 1,
            samples: 100,
            grid_samples: 6,
            n: 512,
            c_kappa_1: super::DEFAULT_C_KAPPA_1,
            c_kappa_2: super::DEFAULT_C_KAPPA_2,
            c_omega: super::DEFAULT_C_OMEGA,
            j_values: vec![1, 2],
            max_grid: 2_000_000,
        }
    }
}

/// Measurements of the face factor for one instance.
#[derive(Debug, Clone, Copy)]
pub struct FactorMeasurements {
    /// `max |(D_m)_{alpha,.} F'|`.
    pub null_residual: f64,
    pub rank: usize,
    pub q_alpha: usize,
    /// `max |F B_fine(x) - B_face(x)|` over 200 grid points.
    pub basis_identity: f64,
    pub min_entry: f64,
    /// `||F'||_inf`.
    pub transpose_norm: f64,
    /// `||K^{-1} Xi F||_inf` and its bound `m / c1`.
    pub scaled_norm: f64,
    pub scaled_bound: f64,
    /// `||F||_inf` and its polynomial bound.
    pub norm: f64,
    pub norm_bound: f64,
}

pub fn measure_factor(alpha: &ActiveSet, m: usize, knots: &KnotSequence) -> Result<FactorMeasurements> {
    let fs = build_f(alpha, m, knots)?;
    let f = fs.f();
    let d = weighted_difference(m, knots)?;
    let mut null_residual: f64 = 0.0;
    for &i in alpha.alpha() {
        let r = d.constraint().row(i - 1) * f.transpose();
        null_residual = null_residual.max(r.abs().max());
    }
    let v = v_alpha_knots(alpha, knots)?;
    let mut basis_identity: f64 = 0.0;
    for g in 0..200 {
        let x = g as f64 / 199.0;
        let fine = DVector::from_vec(eval_basis(m, knots, x)?);
        let coarse = DVector::from_vec(eval_basis(m, &v, x)?);
        basis_identity = basis_identity.max((f * fine - coarse).abs().max());
    }
    let k = knots.num_intervals() as f64;
    let c1 = knots.c_kappa_1();
    let mut scaled = f / k;
    scale_rows(&mut scaled, fs.xi_top().as_slice());
    let t_n = knots.basis_len(m) as f64;
    let norm_bound = (2.0 * m as f64 / c1 * (knots.c_kappa_2() / k).max(1.0) * t_n).powi(m as i32 - 1)
        * k.powi(m as i32);
    Ok(FactorMeasurements {
        null_residual,
        rank: rank(f, 1e-10),
        q_alpha: alpha.q_alpha(),
        basis_identity,
        min_entry: f.min(),
        transpose_norm: inf_norm(&f.transpose()),
        scaled_norm: inf_norm(&scaled),
        scaled_bound: m as f64 / c1,
        norm: inf_norm(f),
        norm_bound,
    })
}

/// Grid-level measurements for one instance and grid triple.
#[derive(Debug, Clone)]
pub struct GridMeasurements {
    pub l: usize,
    pub mm: usize,
    pub j: usize,
    /// Per level `p = 1..=m`: worst `|Z_p - B_face_p|` on the grid and the
    /// declared bound `6 (2^{p-1} - 1) M^{p-1} / L`.
    pub recursion_error: Vec<f64>,
    pub recursion_bound: Vec<f64>,
    /// `max |Z_m - F X_m|` relative to `max(1, max |Z_m|)`.
    pub cross_check: f64,
    /// `||G - (1/L) Xi H H'||_inf` and `6 c1 (3 2^{m-1} - 2) / J`.
    pub face_gramian_error: f64,
    pub face_gramian_bound: f64,
}

/// Worst deviation of every recursion level from the face B-splines at the
/// grid points `(k - 1) / L`.
pub fn recursion_errors(alpha: &ActiveSet, m: usize, knots: &KnotSequence, l: usize) -> Result<Vec<f64>> {
    let zs = build_z_h(alpha, m, knots, l)?;
    recursion_errors_of(&zs, alpha, m, knots)
}

fn recursion_errors_of(zs: &ZStages, alpha: &ActiveSet, m: usize, knots: &KnotSequence) -> Result<Vec<f64>> {
    let l = zs.l;
    let v = v_alpha_knots(alpha, knots)?;
    let mut out = Vec::with_capacity(m);
    for p in 1..=m {
        let z = &zs.z[p - 1];
        let mut worst: f64 = 0.0;
        for k in 0..l {
            let (first, vals) = nonzero_basis(p, &v, k as f64 / l as f64);
            for j in 0..z.nrows() {
                let b = if j >= first && j < first + p { vals[j - first] } else { 0.0 };
                worst = worst.max((z[(j, k)] - b).abs());
            }
        }
        out.push(worst);
    }
    Ok(out)
}

pub fn measure_grid(alpha: &ActiveSet, m: usize, knots: &KnotSequence, j: usize) -> Result<GridMeasurements> {
    let (l, mm, j) = refinement_grid(m, knots.c_kappa_1(), knots.num_intervals(), j)?;
    let zs = build_z_h(alpha, m, knots, l)?;
    let recursion_error = recursion_errors_of(&zs, alpha, m, knots)?;
    let recursion_bound = (1..=m)
        .map(|p| 6.0 * (2f64.powi(p as i32 - 1) - 1.0) * (mm as f64).powi(p as i32 - 1) / l as f64)
        .collect();
    let fs = build_f(alpha, m, knots)?;
    let prod = fs.f() * x_final(m, knots, l)?;
    let z = &zs.z[m - 1];
    let cross_check = (z - prod).abs().max() / z.abs().max().max(1.0);
    let g = gramian(alpha, m, knots)?.g;
    let mut approx: DMatrix<f64> = &zs.h * zs.h.transpose() / l as f64;
    scale_rows(&mut approx, fs.xi_top().as_slice());
    let c1 = knots.c_kappa_1();
    Ok(GridMeasurements {
        l,
        mm,
        j,
        recursion_error,
        recursion_bound,
        cross_check,
        face_gramian_error: inf_norm(&(g - approx)),
        face_gramian_bound: 6.0 * c1 * (3.0 * 2f64.powi(m as i32 - 1) - 2.0) / j as f64,
    })
}

/// Knot-level Gramian checks on a refinement grid.
#[derive(Debug, Clone, Copy)]
pub struct KnotGramianMeasurements {
    /// `||Lambda_hat^{-1}||_inf` and `m rho / c1` with `rho` the inverse
    /// norm of this sequence's normalised Gramian.
    pub inverse_norm: f64,
    pub inverse_bound: f64,
    /// `||Lambda_tilde - Lambda_hat||_inf` and `6 c2 c1 (3 2^{m-1} - 2) / J`.
    pub grid_error: f64,
    pub grid_bound: f64,
}

pub fn measure_knot_gramians(m: usize, knots: &KnotSequence, j: usize) -> Result<KnotGramianMeasurements> {
    let (l, _, j) = refinement_grid(m, knots.c_kappa_1(), knots.num_intervals(), j)?;
    let lg = limit_gramians(m, knots, l)?;
    let rho = gramian(&ActiveSet::empty(knots.num_intervals(), m), m, knots)?.inv_inf_norm;
    let c1 = knots.c_kappa_1();
    Ok(KnotGramianMeasurements {
        inverse_norm: inv_inf_norm(&lg.lambda_hat)?,
        inverse_bound: m as f64 * rho / c1,
        grid_error: inf_norm(&(&lg.lambda_tilde - &lg.lambda_hat)),
        grid_bound: 6.0 * knots.c_kappa_2() * c1 * (3.0 * 2f64.powi(m as i32 - 1) - 2.0) / j as f64,
    })
}

/// `||Lambda - Lambda_hat||_inf`, its bound
/// `(2m-1)(6 m^2 c_omega c2 / c1 + 3 c_omega) K / n`, and the largest entry
/// of `Lambda` outside the band `|i - j| < m`.
pub fn measure_design_gramian(m: usize, knots: &KnotSequence, design: &DesignPoints) -> Result<(f64, f64, f64)> {
    let zeros = vec![0.0; design.n() + 1];
    let sys = build_design_system(m, knots, design, &zeros)?;
    let k = knots.num_intervals() as f64;
    let lambda_hat = crate::shapeops::inner_products(m, knots) * k;
    let err = inf_norm(&(&sys.lambda - lambda_hat));
    let (c1, c2, cw) = (knots.c_kappa_1(), knots.c_kappa_2(), design.c_omega());
    let mf = m as f64;
    let bound = (2.0 * mf - 1.0) * (6.0 * mf * mf * cw * c2 / c1 + 3.0 * cw) * k / design.n() as f64;
    let mut off_band: f64 = 0.0;
    for i in 0..sys.t_n() {
        for jj in 0..sys.t_n() {
            if i.abs_diff(jj) >= m {
                off_band = off_band.max(sys.lambda[(i, jj)].abs());
            }
        }
    }
    Ok((err, bound, off_band))
}

fn params_of(m: usize, knots: &KnotSequence, alpha: Option<&ActiveSet>) -> String {
    let mut s = format!(
        "m={m} K={} c1={:.4} c2={:.4}",
        knots.num_intervals(),
        knots.c_kappa_1(),
        knots.c_kappa_2()
    );
    if let Some(a) = alpha {
        s.push_str(&format!(" alpha={a}"));
    }
    s
}

fn random_alpha(k: usize, m: usize, rng: &mut Stream) -> ActiveSet {
    let flags: Vec<bool> = (0..k - 1).map(|_| rng.uniform() < 0.5).collect();
    ActiveSet::from_flags(k, m, &flags)
}

fn factor_cell(cfg: &BoundConfig, cell: usize) -> Vec<ResultRecord> {
    let mut rng = Stream::new(cfg.seed, cell as u64);
    let k = rng.int_in(1, cfg.max_k as u64) as usize;
    let knots = match sample_knots(k, cfg.c_kappa_1, cfg.c_kappa_2, &mut rng) {
        Ok(kn) => kn,
        Err(e) => return vec![ResultRecord::error(EXPERIMENT, cell, "knot-sampling", String::new(), &e)],
    };
    let m = cfg.m;
    let alpha = random_alpha(k, m, &mut rng);
    let params = params_of(m, &knots, Some(&alpha));
    let mut out = Vec::new();
    match measure_factor(&alpha, m, &knots) {
        Ok(fm) => {
            out.push(ResultRecord::upper(EXPERIMENT, cell, "face-null-space", params.clone(), fm.null_residual, 1e-9).exact());
            out.push(ResultRecord::within(EXPERIMENT, cell, "face-factor-rank", params.clone(), fm.rank as f64, fm.q_alpha as f64, 0.0).exact());
            out.push(ResultRecord::upper(EXPERIMENT, cell, "face-basis-identity", params.clone(), fm.basis_identity, 1e-9).exact());
            out.push(ResultRecord::lower(EXPERIMENT, cell, "factor-nonnegative", params.clone(), fm.min_entry, -1e-13).exact());
            out.push(ResultRecord::within(EXPERIMENT, cell, "factor-column-sums", params.clone(), fm.transpose_norm, 1.0, 1e-10).exact());
            out.push(ResultRecord::upper(EXPERIMENT, cell, "scaled-factor-norm", params.clone(), fm.scaled_norm, fm.scaled_bound + 1e-10));
            out.push(ResultRecord::upper(EXPERIMENT, cell, "factor-norm", params.clone(), fm.norm, fm.norm_bound));
        }
        Err(e) => out.push(ResultRecord::error(EXPERIMENT, cell, "face-factor", params.clone(), &e)),
    }
    match weighted_difference(m, &knots) {
        Ok(d) => {
            let worst = d
                .stages
                .iter()
                .filter(|s| s.nrows() > 0)
                .map(|s| {
                    let smax = s.clone().svd(false, false).singular_values.max();
                    smax / min_singular_value(&s.transpose())
                })
                .fold(1.0, f64::max);
            out.push(ResultRecord::upper(EXPERIMENT, cell, "difference-full-rank", params_of(m, &knots, None), worst, 1e12));
        }
        Err(e) => out.push(ResultRecord::error(EXPERIMENT, cell, "difference-full-rank", params, &e)),
    }
    out
}

/// Largest `K <= max_k` whose refinement grid stays within `max_grid`.
fn grid_k_limit(cfg: &BoundConfig, c1: f64, j: usize) -> usize {
    (1..=cfg.max_k)
        .take_while(|&k| {
            refinement_grid(cfg.m, c1, k, j)
                .map(|(l, _, _)| l <= cfg.max_grid)
                .unwrap_or(false)
        })
        .last()
        .unwrap_or(0)
}

fn grid_cell(cfg: &BoundConfig, cell: usize, idx: usize) -> Vec<ResultRecord> {
    let mut rng = Stream::new(cfg.seed, cell as u64);
    let m = cfg.m;
    let j = cfg.j_values[idx % cfg.j_values.len()];
    // alternate uniform knots (c1 = 1) and random knots from the class
    let uniform = idx.is_multiple_of(2);
    let c1 = if uniform { 1.0 } else { cfg.c_kappa_1 };
    let k_max = grid_k_limit(cfg, c1, j);
    if k_max == 0 {
        let e = crate::error::Error::Argument("no K fits the grid budget".into());
        return vec![ResultRecord::error(EXPERIMENT, cell, "grid-recursion", format!("m={m} J={j}"), &e)];
    }
    let k = rng.int_in(1, k_max as u64) as usize;
    let knots = if uniform {
        KnotSequence::uniform(k)
    } else {
        sample_knots(k, cfg.c_kappa_1, cfg.c_kappa_2, &mut rng)
    };
    let knots = match knots {
        Ok(kn) => kn,
        Err(e) => return vec![ResultRecord::error(EXPERIMENT, cell, "knot-sampling", String::new(), &e)],
    };
    let alpha = random_alpha(k, m, &mut rng);
    let params = format!("{} J={j}", params_of(m, &knots, Some(&alpha)));
    let mut out = Vec::new();
    match measure_grid(&alpha, m, &knots, j) {
        Ok(g) => {
            let params = format!("{params} L={} M={}", g.l, g.mm);
            for p in 1..=m {
                let rec = if p == 1 {
                    ResultRecord::upper(EXPERIMENT, cell, "grid-recursion-exact", params.clone(), g.recursion_error[0], 1e-14).exact()
                } else {
                    ResultRecord::upper(EXPERIMENT, cell, "grid-recursion", params.clone(), g.recursion_error[p - 1], g.recursion_bound[p - 1])
                };
                out.push(rec.with_detail(format!("p={p}")));
            }
            out.push(ResultRecord::upper(EXPERIMENT, cell, "grid-factor-cross-check", params.clone(), g.cross_check, 1e-9).exact());
            out.push(ResultRecord::upper(EXPERIMENT, cell, "face-gramian-approximation", params.clone(), g.face_gramian_error, g.face_gramian_bound));
        }
        Err(e) => out.push(ResultRecord::error(EXPERIMENT, cell, "grid-recursion", params.clone(), &e)),
    }
    match measure_knot_gramians(m, &knots, j) {
        Ok(kg) => {
            let params = params_of(m, &knots, None) + &format!(" J={j}");
            out.push(ResultRecord::upper(EXPERIMENT, cell, "knot-gramian-inverse", params.clone(), kg.inverse_norm, kg.inverse_bound));
            out.push(ResultRecord::upper(EXPERIMENT, cell, "knot-gramian-approximation", params, kg.grid_error, kg.grid_bound));
        }
        Err(e) => out.push(ResultRecord::error(EXPERIMENT, cell, "knot-gramian", params, &e)),
    }
    out
}

fn design_cell(cfg: &BoundConfig, cell: usize) -> Vec<ResultRecord> {
    let mut rng = Stream::new(cfg.seed, cell as u64);
    let m = cfg.m;
    let drawn = sample_knots(cfg.max_k, cfg.c_kappa_1, cfg.c_kappa_2, &mut rng)
        .and_then(|k| sample_design(cfg.n, cfg.c_omega, &mut rng).map(|d| (k, d)));
    let (knots, design) = match drawn {
        Ok(x) => x,
        Err(e) => return vec![ResultRecord::error(EXPERIMENT, cell, "design-sampling", String::new(), &e)],
    };
    let params = format!("{} n={} c_omega={}", params_of(m, &knots, None), cfg.n, cfg.c_omega);
    match measure_design_gramian(m, &knots, &design) {
        Ok((err, bound, off_band)) => vec![
            ResultRecord::upper(EXPERIMENT, cell, "design-gramian-approximation", params.clone(), err, bound),
            ResultRecord::upper(EXPERIMENT, cell, "design-gramian-bandwidth", params, off_band, 0.0).exact(),
        ],
        Err(e) => vec![ResultRecord::error(EXPERIMENT, cell, "design-gramian-approximation", params, &e)],
    }
}

/// Run every check; failures of sub-computations become failed records.
pub fn run_bound_suite(cfg: &BoundConfig) -> Result<Vec<ResultRecord>> {
    if cfg.m == 0 || cfg.m > 4 {
        return arg(format!("bound suite supports 1 <= m <= 4, got {}", cfg.m));
    }
    if cfg.max_k == 0 || cfg.max_k > 12 {
        return arg(format!("bound suite supports 1 <= max K <= 12, got {}", cfg.max_k));
    }
    if cfg.j_values.is_empty() || cfg.j_values.contains(&0) {
        return arg("J values must be positive");
    }
    if cfg.n <= cfg.max_k {
        return arg(format!("need n > K (n={}, K={})", cfg.n, cfg.max_k));
    }
    #[derive(Clone, Copy)]
    enum Job {
        Factor,
        Grid(usize),
        Design,
    }
    let mut jobs = Vec::new();
    jobs.extend((0..cfg.samples).map(|_| Job::Factor));
    jobs.extend((0..cfg.grid_samples).map(Job::Grid));
    jobs.extend((0..cfg.samples).map(|_| Job::Design));
    let per_cell: Vec<Vec<ResultRecord>> = super::install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(cell, job)| match job {
                Job::Factor => factor_cell(cfg, cell),
                Job::Grid(i) => grid_cell(cfg, cell, *i),
                Job::Design => design_cell(cfg, cell),
            })
            .collect()
    });
    Ok(per_cell.into_iter().flatten().collect())
}

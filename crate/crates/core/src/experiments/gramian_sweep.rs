//! Empirical bounds on the inverse of normalised face Gramians.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::records::ResultRecord;
use super::sample_knots;
use crate::error::{arg, Result};
use crate::linalg::inv_inf_norm;
use crate::rng::Stream;
use crate::shapeops::{grid_face_gramian, gramian, refinement_grid, ActiveSet};
use crate::splines::KnotSequence;

const EXPERIMENT: &str = "gramian";

#[derive(Debug, Clone, Serialize)]
pub struct GramianSweepConfig {
    pub m_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub knots_per_cell: usize,
    pub alphas_per_knots: usize,
    pub seed: u64,
    pub c_kappa_1: f64,
    pub c_kappa_2: f64,
    /// The plateau compares the maximum over `K >= plateau_low` with the
    /// maximum over `K >= plateau_high`.
    pub plateau_low: usize,
    pub plateau_high: usize,
    pub plateau_tol: f64,
    /// Knot counts and draws for the grid-approximation check.
    pub grid_k_list: Vec<usize>,
    pub grid_samples: usize,
    pub max_grid: usize,
}

impl Default for GramianSweepConfig {
    fn default() -> Self {
        GramianSweepConfig {
            m_list: vec![1, 2, 3, 4],
            k_list: vec![10, 20, 40],
            knots_per_cell: 50,
            alphas_per_knots: 20,
            seed: 1,
            c_kappa_1: super::DEFAULT_C_KAPPA_1,
            c_kappa_2: super::DEFAULT_C_KAPPA_2,
            plateau_low: 20,
            plateau_high: 40,
            plateau_tol: 0.1,
            grid_k_list: vec![2, 3],
            grid_samples: 4,
            max_grid: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GramianSweepResult {
    pub records: Vec<ResultRecord>,
    /// Running maximum of the inverse norm per order.
    pub rho: BTreeMap<usize, f64>,
    /// Whether the plateau criterion held per order (absent if the K list
    /// does not reach both windows).
    pub plateau: BTreeMap<usize, bool>,
}

/// Maximum inverse norm over `alphas` random face sets (the empty and
/// full sets are always included) on one knot sequence.
fn knot_cell(m: usize, knots: &KnotSequence, alphas: usize, rng: &mut Stream) -> Result<(f64, f64)> {
    let k = knots.num_intervals();
    let mut worst: f64 = 0.0;
    let mut best = f64::INFINITY;
    for a in 0..alphas.max(2) {
        let alpha = match a {
            0 => ActiveSet::empty(k, m),
            1 => ActiveSet::full(k, m),
            _ => {
                let p = rng.uniform();
                let flags: Vec<bool> = (0..k - 1).map(|_| rng.uniform() < p).collect();
                ActiveSet::from_flags(k, m, &flags)
            }
        };
        let v = gramian(&alpha, m, knots)?.inv_inf_norm;
        if !v.is_finite() {
            return Err(crate::error::Error::Conditioning("non-finite inverse norm".into()));
        }
        worst = worst.max(v);
        best = best.min(v);
    }
    Ok((worst, best))
}

pub fn gramian_sweep(cfg: &GramianSweepConfig) -> Result<GramianSweepResult> {
    if cfg.m_list.is_empty() || cfg.k_list.is_empty() || cfg.knots_per_cell == 0 {
        return arg("gramian sweep needs orders, knot counts and at least one draw");
    }
    if cfg.m_list.contains(&0) || cfg.k_list.contains(&0) {
        return arg("orders and knot counts must be positive");
    }
    let jobs: Vec<(usize, usize, usize)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| {
            cfg.k_list
                .iter()
                .flat_map(move |&k| (0..cfg.knots_per_cell).map(move |d| (m, k, d)))
        })
        .collect();
    let cells: Vec<(usize, usize, Option<f64>, ResultRecord)> = super::install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(cell, &(m, k, _))| {
                let mut rng = Stream::new(cfg.seed, cell as u64);
                let drawn = sample_knots(k, cfg.c_kappa_1, cfg.c_kappa_2, &mut rng);
                let params = format!("m={m} K={k}");
                let res = drawn.and_then(|kn| knot_cell(m, &kn, cfg.alphas_per_knots, &mut rng));
                match res {
                    Ok((worst, best)) => {
                        let rec = if m == 1 {
                            let dev = (worst - 1.0).abs().max((best - 1.0).abs());
                            ResultRecord::upper(EXPERIMENT, cell, "order-one-identity", params, dev, 1e-10).exact()
                        } else {
                            ResultRecord::info(EXPERIMENT, cell, "face-gramian-inverse", params, worst)
                        };
                        (m, k, Some(worst), rec)
                    }
                    Err(e) => (m, k, None, ResultRecord::error(EXPERIMENT, cell, "face-gramian-inverse", params, &e)),
                }
            })
            .collect()
    });

    let mut records: Vec<ResultRecord> = Vec::new();
    let mut rho: BTreeMap<usize, f64> = BTreeMap::new();
    let mut window: BTreeMap<(usize, bool), f64> = BTreeMap::new();
    for (m, k, worst, rec) in cells {
        if let Some(w) = worst {
            let r = rho.entry(m).or_insert(0.0);
            *r = r.max(w);
            if k >= cfg.plateau_low {
                let e = window.entry((m, false)).or_insert(0.0);
                *e = e.max(w);
            }
            if k >= cfg.plateau_high {
                let e = window.entry((m, true)).or_insert(0.0);
                *e = e.max(w);
            }
        }
        records.push(rec);
    }
    let mut cell = jobs.len();
    let mut plateau = BTreeMap::new();
    for &m in &cfg.m_list {
        let r = rho.get(&m).copied().unwrap_or(f64::NAN);
        records.push(ResultRecord::info(EXPERIMENT, cell, "rho-estimate", format!("m={m}"), r));
        cell += 1;
        if let (Some(lo), Some(hi)) = (window.get(&(m, false)), window.get(&(m, true))) {
            let rec = ResultRecord::upper(
                EXPERIMENT,
                cell,
                "rho-plateau",
                format!("m={m} K>={} vs K>={}", cfg.plateau_low, cfg.plateau_high),
                lo / hi,
                1.0 + cfg.plateau_tol,
            );
            plateau.insert(m, rec.passed());
            records.push(rec);
            cell += 1;
        }
    }

    // grid approximation of the face Gramian inverse at small K
    let grid_jobs: Vec<(usize, usize, usize)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| {
            cfg.grid_k_list
                .iter()
                .flat_map(move |&k| (0..cfg.grid_samples).map(move |d| (m, k, d)))
        })
        .collect();
    let base = cell;
    let grid_records: Vec<ResultRecord> = super::install(|| {
        grid_jobs
            .par_iter()
            .enumerate()
            .map(|(i, &(m, k, d))| {
                let cell = base + i;
                let mut rng = Stream::new(cfg.seed, cell as u64);
                let r = rho.get(&m).copied().unwrap_or(f64::NAN);
                grid_inverse_record(cfg, cell, m, k, d, r, &mut rng)
            })
            .collect()
    });
    records.extend(grid_records);
    Ok(GramianSweepResult {
        records,
        rho,
        plateau,
    })
}

fn grid_inverse_record(
    cfg: &GramianSweepConfig,
    cell: usize,
    m: usize,
    k: usize,
    draw: usize,
    rho: f64,
    rng: &mut Stream,
) -> ResultRecord {
    let stmt = "grid-gramian-inverse";
    // even draws use uniform knots, odd draws random knots with tight constants
    let knots = if draw.is_multiple_of(2) {
        KnotSequence::uniform(k)
    } else {
        sample_knots(k, cfg.c_kappa_1, cfg.c_kappa_2, rng)
            .and_then(|kn| KnotSequence::from_breakpoints(kn.points().to_vec()))
    };
    let knots = match knots {
        Ok(kn) => kn,
        Err(e) => return ResultRecord::error(EXPERIMENT, cell, stmt, format!("m={m} K={k}"), &e),
    };
    let flags: Vec<bool> = (0..k - 1).map(|_| rng.uniform() < 0.5).collect();
    let alpha = ActiveSet::from_flags(k, m, &flags);
    let params = format!("m={m} K={k} c1={:.4} alpha={alpha}", knots.c_kappa_1());
    let res = refinement_grid(m, knots.c_kappa_1(), k, 1).and_then(|(l, _, _)| {
        if l > cfg.max_grid {
            return arg(format!("grid size {l} over budget"));
        }
        let a = grid_face_gramian(&alpha, m, &knots, l)?;
        inv_inf_norm(&a).map(|v| (v, l))
    });
    match res {
        Ok((v, l)) => ResultRecord::upper(EXPERIMENT, cell, stmt, format!("{params} L={l}"), v, 1.5 * rho),
        Err(e) => ResultRecord::error(EXPERIMENT, cell, stmt, params, &e),
    }
}

//! Sup-norm Lipschitz constants of the data-to-coefficient map across sample
//! sizes and meshes.

use std::collections::BTreeMap;

use serde::Serialize;

use super::records::ResultRecord;
use super::{sample_design, sample_knots};
use crate::error::{arg, Result};
use crate::qp::{lipschitz_constant, LipschitzMode, DEFAULT_PROBE_PAIRS};
use crate::rng::Stream;
use crate::splines::{build_design_system, DesignPoints, KnotSequence};

const EXPERIMENT: &str = "lipschitz";

/// Largest knot count for exhaustive enumeration in the sweep.
pub const MAX_EXACT_K: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mesh {
    Uniform,
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzConfig {
    pub m: usize,
    pub k_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub mesh: Mesh,
    /// Knot draws per `K` (uniform meshes always use one).
    pub draws: usize,
    pub seed: u64,
    pub probe_pairs: usize,
    pub c_kappa_1: f64,
    pub c_kappa_2: f64,
    pub c_omega: f64,
    /// Gramian constant; `None` runs a small sweep to estimate it.
    pub rho: Option<f64>,
    /// Relative slack on the `9 m rho / (4 c1)` ceiling.
    pub ceiling_slack: f64,
    /// Allowed relative variation of the exact constant across `n`.
    pub plateau_tol: f64,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        LipschitzConfig {
            m: 2,
            k_list: vec![5],
            n_list: vec![128, 512, 2048],
            mesh: Mesh::Uniform,
            draws: 1,
            seed: 1,
            probe_pairs: DEFAULT_PROBE_PAIRS,
            c_kappa_1: super::DEFAULT_C_KAPPA_1,
            c_kappa_2: super::DEFAULT_C_KAPPA_2,
            c_omega: super::DEFAULT_C_OMEGA,
            rho: None,
            ceiling_slack: 0.5,
            plateau_tol: 0.1,
        }
    }
}

/// Exact and probed constants for one `(n, K, mesh draw)` cell.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzCell {
    pub n: usize,
    pub k: usize,
    pub draw: usize,
    pub exact: f64,
    pub probe: f64,
}

pub fn lipschitz_cell(
    m: usize,
    knots: &KnotSequence,
    design: &DesignPoints,
    probe_seed: u64,
    probe_pairs: usize,
) -> Result<(f64, f64)> {
    let y: Vec<f64> = design.points().iter().map(|x| x.powi(m as i32)).collect();
    let sys = build_design_system(m, knots, design, &y)?;
    let exact = lipschitz_constant(&sys, m, knots, LipschitzMode::Exact)?;
    let probe = lipschitz_constant(
        &sys,
        m,
        knots,
        LipschitzMode::Probe {
            seed: probe_seed,
            pairs: probe_pairs,
        },
    )?;
    Ok((exact, probe))
}

fn estimate_rho(m: usize, seed: u64) -> Result<f64> {
    let cfg = super::gramian_sweep::GramianSweepConfig {
        m_list: vec![m],
        k_list: vec![10, 20],
        knots_per_cell: 10,
        alphas_per_knots: 10,
        seed,
        grid_k_list: vec![],
        ..Default::default()
    };
    let res = super::gramian_sweep::gramian_sweep(&cfg)?;
    res.rho
        .get(&m)
        .copied()
        .ok_or_else(|| crate::error::Error::Inconsistent("empty Gramian sweep".into()))
}

pub fn lipschitz_sweep(cfg: &LipschitzConfig) -> Result<Vec<ResultRecord>> {
    if cfg.m == 0 || cfg.k_list.is_empty() || cfg.n_list.is_empty() {
        return arg("lipschitz sweep needs m >= 1 and nonempty K and n lists");
    }
    if let Some(&k) = cfg.k_list.iter().find(|&&k| !(1..=MAX_EXACT_K).contains(&k)) {
        return arg(format!("exact enumeration supports 1 <= K <= {MAX_EXACT_K}, got {k}"));
    }
    for &n in &cfg.n_list {
        if cfg.k_list.iter().any(|&k| k >= n) {
            return arg(format!("every K must be below n (n={n})"));
        }
    }
    let rho = match cfg.rho {
        Some(r) => r,
        None => estimate_rho(cfg.m, cfg.seed)?,
    };
    let draws = if cfg.mesh == Mesh::Uniform { 1 } else { cfg.draws.max(1) };
    let mut jobs = Vec::new();
    for &k in &cfg.k_list {
        for draw in 0..draws {
            for &n in &cfg.n_list {
                jobs.push((k, draw, n));
            }
        }
    }
    let m = cfg.m;
    // cells run one at a time; each probe already runs its pairs in parallel
    let cells: Vec<std::result::Result<LipschitzCell, (usize, usize, usize, crate::error::Error)>> =
        super::install(|| {
            jobs.iter()
                .enumerate()
                .map(|(cell, &(k, draw, n))| {
                    // knots depend on (K, draw) only so that n varies on a fixed mesh
                    let mut mesh_rng = Stream::new(cfg.seed, (k * 1_000 + draw) as u64);
                    let mut design_rng = Stream::new(cfg.seed, (1_000_000 + cell) as u64);
                    let meshes = match cfg.mesh {
                        Mesh::Uniform => KnotSequence::uniform(k).and_then(|kn| Ok((kn, DesignPoints::uniform(n)?))),
                        Mesh::Random => sample_knots(k, cfg.c_kappa_1, cfg.c_kappa_2, &mut mesh_rng)
                            .and_then(|kn| Ok((kn, sample_design(n, cfg.c_omega, &mut design_rng)?))),
                    };
                    meshes
                        .and_then(|(kn, d)| lipschitz_cell(m, &kn, &d, cfg.seed ^ cell as u64, cfg.probe_pairs))
                        .map(|(exact, probe)| LipschitzCell { n, k, draw, exact, probe })
                        .map_err(|e| (n, k, draw, e))
                })
                .collect()
        });

    let c1 = match cfg.mesh {
        Mesh::Uniform => 1.0,
        Mesh::Random => cfg.c_kappa_1,
    };
    let ceiling = 9.0 * m as f64 * rho / (4.0 * c1);
    let mut records = Vec::new();
    let mut by_mesh: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (cell, res) in cells.into_iter().enumerate() {
        match res {
            Ok(c) => {
                let params = format!("m={m} K={} n={} mesh={:?} draw={}", c.k, c.n, cfg.mesh, c.draw).to_lowercase();
                records.push(ResultRecord::info(EXPERIMENT, cell, "lipschitz-exact", params.clone(), c.exact));
                records.push(ResultRecord::upper(EXPERIMENT, cell, "lipschitz-probe", params.clone(), c.probe, c.exact + 1e-6));
                records.push(
                    ResultRecord::upper(EXPERIMENT, cell, "lipschitz-ceiling", params, c.exact, ceiling * (1.0 + cfg.ceiling_slack))
                        .with_detail(format!("rho={}", super::records::fmt_float(rho))),
                );
                by_mesh.entry((c.k, c.draw)).or_default().push(c.exact);
            }
            Err((n, k, draw, e)) => records.push(ResultRecord::error(
                EXPERIMENT,
                cell,
                "lipschitz-exact",
                format!("m={m} K={k} n={n} draw={draw}"),
                &e,
            )),
        }
    }
    let mut cell = jobs.len();
    for ((k, draw), vals) in by_mesh {
        if vals.len() < 2 {
            continue;
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        records.push(ResultRecord::upper(
            EXPERIMENT,
            cell,
            "lipschitz-plateau",
            format!("m={m} K={k} draw={draw}"),
            (hi - lo) / lo,
            cfg.plateau_tol,
        ));
        cell += 1;
    }
    Ok(records)
}

//! Seeded experiment suites that measure the matrix bounds and convergence
//! rates, plus the command-line front end.

pub mod bounds;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod gramian_sweep;
pub mod lipschitz;
pub mod rates;
pub mod records;

pub use catalog::{truth_by_name, Truth, TRUTHS};
pub use records::{ResultRecord, Status};

use crate::error::{arg, Result};
use crate::rng::Stream;
use crate::splines::{DesignPoints, KnotSequence};

/// Default mesh constants used by the suites.
pub const DEFAULT_C_KAPPA_1: f64 = 0.5;
pub const DEFAULT_C_KAPPA_2: f64 = 1.5;
pub const DEFAULT_C_OMEGA: f64 = 2.0;

/// Number of redraws before a mesh sampler gives up.
const MAX_REDRAWS: usize = 10_000;

fn normalized_points(gaps: &[f64]) -> Vec<f64> {
    let total: f64 = gaps.iter().sum();
    let mut pts = Vec::with_capacity(gaps.len() + 1);
    pts.push(0.0);
    let mut acc = 0.0;
    for g in &gaps[..gaps.len() - 1] {
        acc += g;
        pts.push(acc / total);
    }
    pts.push(1.0);
    pts
}

/// Random knots: gaps uniform on `[c1/K, c2/K]`, renormalised to sum to one,
/// redrawn until the renormalised gaps still satisfy the mesh bounds.
pub fn sample_knots(k: usize, c_kappa_1: f64, c_kappa_2: f64, rng: &mut Stream) -> Result<KnotSequence> {
    if k == 0 {
        return arg("need at least one knot interval");
    }
    for _ in 0..MAX_REDRAWS {
        let gaps: Vec<f64> = (0..k)
            .map(|_| rng.uniform_in(c_kappa_1, c_kappa_2) / k as f64)
            .collect();
        if let Ok(knots) = KnotSequence::new(normalized_points(&gaps), c_kappa_1, c_kappa_2) {
            return Ok(knots);
        }
    }
    arg(format!(
        "could not draw knots in the mesh class (K={k}, c1={c_kappa_1}, c2={c_kappa_2})"
    ))
}

/// Random design: gaps uniform on `[0.5/n, 1.5/n]`, renormalised, and
/// checked against `c_omega`.
pub fn sample_design(n: usize, c_omega: f64, rng: &mut Stream) -> Result<DesignPoints> {
    if n == 0 {
        return arg("design needs n >= 1");
    }
    for _ in 0..MAX_REDRAWS {
        let gaps: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.5, 1.5) / n as f64).collect();
        if let Ok(d) = DesignPoints::new(normalized_points(&gaps), c_omega) {
            return Ok(d);
        }
    }
    arg(format!("could not draw a design with c_omega={c_omega}"))
}

/// `y_i = f(x_i) + sigma z_i` with standard normal `z_i` from the stream
/// `(seed, 0)`.
pub fn simulate_model(truth: impl Fn(f64) -> f64, design: &DesignPoints, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    simulate_with(truth, design, sigma, &mut Stream::new(seed, 0))
}

pub fn simulate_with(
    truth: impl Fn(f64) -> f64,
    design: &DesignPoints,
    sigma: f64,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return arg(format!("sigma must be nonnegative, got {sigma}"));
    }
    Ok(design
        .points()
        .iter()
        .map(|&x| {
            let f = truth(x);
            if sigma == 0.0 {
                f
            } else {
                f + sigma * rng.normal()
            }
        })
        .collect())
}

/// Thread pool honouring `SHAPESPLINE_THREADS`; default is machine
/// parallelism.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var("SHAPESPLINE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|t| *t > 0);
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

//! Command-line front end. Exit codes: 0 when every declared check passes,
//! 1 when a check fails, 2 on malformed input.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::bounds::{run_bound_suite, BoundConfig};
use super::catalog::{default_truth, truth_by_name};
use super::config::ConfigFile;
use super::gramian_sweep::{gramian_sweep, GramianSweepConfig};
use super::lipschitz::{lipschitz_sweep, LipschitzConfig, Mesh};
use super::rates::{rate_experiment, schedule, RateConfig, RateKind};
use super::records::{fmt_float, read_csv, summarize, write_csv, ResultRecord, Status};
use super::{sample_design, simulate_model};
use crate::error::{Error, Result};
use crate::estimator::{fit, DEFAULT_GRID};
use crate::rng::Stream;
use crate::splines::{DesignPoints, KnotSequence};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "shapespline", version, about = "Shape-constrained B-spline regression and bound certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a shape-constrained spline to a CSV file with columns x,y.
    Fit(FitArgs),
    /// Draw y = f(x) + sigma z on a design and print it as CSV.
    Simulate(SimulateArgs),
    /// Matrix bound suite.
    Bounds(BoundsArgs),
    /// Face Gramian inverse-norm sweep.
    Gramian(GramianArgs),
    /// Lipschitz constant sweep.
    Lipschitz(LipschitzArgs),
    /// Bias, stochastic or total-risk rate experiment.
    Rates(RatesArgs),
    /// Summarise result CSV files.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    data: PathBuf,
    #[arg(long)]
    m: Option<usize>,
    /// Number of uniform knot intervals.
    #[arg(long)]
    knots: Option<usize>,
    /// Points in the evaluation grid.
    #[arg(long)]
    grid: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    truth: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Design size; the design has n + 1 points.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// uniform or random.
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    c_omega: Option<f64>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    max_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    grid_samples: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    c_kappa_1: Option<f64>,
    #[arg(long)]
    c_kappa_2: Option<f64>,
    #[arg(long)]
    c_omega: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    j_values: Option<Vec<usize>>,
    #[arg(long)]
    max_grid: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct GramianArgs {
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    #[arg(long)]
    knots_per_cell: Option<usize>,
    #[arg(long)]
    alphas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    c_kappa_1: Option<f64>,
    #[arg(long)]
    c_kappa_2: Option<f64>,
    #[arg(long)]
    plateau_low: Option<usize>,
    #[arg(long)]
    plateau_high: Option<usize>,
    #[arg(long)]
    plateau_tol: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_k_list: Option<Vec<usize>>,
    #[arg(long)]
    grid_samples: Option<usize>,
    #[arg(long)]
    max_grid: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct LipschitzArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// uniform or random.
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    probe_pairs: Option<usize>,
    #[arg(long)]
    c_kappa_1: Option<f64>,
    #[arg(long)]
    c_kappa_2: Option<f64>,
    #[arg(long)]
    c_omega: Option<f64>,
    /// Gramian constant; estimated by a small sweep when absent.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    ceiling_slack: Option<f64>,
    #[arg(long)]
    plateau_tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct RatesArgs {
    /// bias, stochastic or total.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Knot counts paired with n-list; when absent K follows the schedule
    /// ceil((n / log n)^(1/q)).
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    c_kappa_1: Option<f64>,
    #[arg(long)]
    c_kappa_2: Option<f64>,
    #[arg(long)]
    c_omega: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

/// Parse `args` (program name first) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let res = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Gramian(a) => cmd_gramian(a),
        Command::Lipschitz(a) => cmd_lipschitz(a),
        Command::Rates(a) => cmd_rates(a),
        Command::Report(a) => cmd_report(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_BAD_INPUT
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Argument(format!("{}: {e}", path.display()))
}

fn load(path: &Option<PathBuf>, allowed: &[&str]) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p, allowed),
        None => Ok(ConfigFile::default()),
    }
}

fn pick<T>(flag: Option<T>, file: Result<Option<T>>, default: T) -> Result<T> {
    Ok(match flag {
        Some(v) => v,
        None => file?.unwrap_or(default),
    })
}

fn require<T>(flag: Option<T>, file: Result<Option<T>>, key: &str) -> Result<T> {
    match flag {
        Some(v) => Ok(v),
        None => file?.ok_or_else(|| Error::Argument(format!("missing required setting '{key}'"))),
    }
}

fn parse_mesh(s: &str) -> Result<Mesh> {
    match s {
        "uniform" => Ok(Mesh::Uniform),
        "random" => Ok(Mesh::Random),
        _ => Err(Error::Argument(format!("unknown mesh '{s}' (uniform, random)"))),
    }
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

/// Read `x,y` samples; `x` must be strictly increasing.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let at = |line: u64, msg: String| Error::Argument(format!("{}: line {line}: {msg}", path.display()));
    let headers = rdr.headers().map_err(|e| at(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(at(1, "expected header 'x,y'".into()));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            at(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize, what: &str| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| at(line, format!("invalid {what} value '{}'", &row[i])))
        };
        let (x, y) = (num(0, "x")?, num(1, "y")?);
        if let Some(&prev) = xs.last() {
            if x <= prev {
                return Err(at(line, format!("x must be strictly increasing ({x} after {prev})")));
            }
        }
        xs.push(x);
        ys.push(y);
    }
    if xs.len() < 2 {
        return Err(Error::Argument(format!("{}: need at least two samples", path.display())));
    }
    Ok((xs, ys))
}

fn cmd_fit(a: FitArgs) -> Result<i32> {
    let cfg = load(&a.common.config, &["m", "knots", "grid"])?;
    let m = require(a.m, cfg.usize("m"), "m")?;
    let k = require(a.knots, cfg.usize("knots"), "knots")?;
    let grid = pick(a.grid, cfg.usize("grid"), DEFAULT_GRID)?;
    let (xs, ys) = read_xy(&a.data)?;
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let mut u: Vec<f64> = xs.iter().map(|x| (x - lo) / (hi - lo)).collect();
    let last = u.len() - 1;
    u[0] = 0.0;
    u[last] = 1.0;
    if k >= last {
        return Err(Error::Argument(format!("knots={k} must be below the number of gaps ({last})")));
    }
    let design = DesignPoints::from_points(u.clone())?;
    if design.c_omega() > super::DEFAULT_C_OMEGA * 4.0 {
        eprintln!(
            "warning: uneven design (c_omega = {:.3}); fits may be poorly conditioned",
            design.c_omega()
        );
    }
    let knots = KnotSequence::uniform(k)?;
    let result = fit(m, &knots, &design, &ys)?;

    let dir = out_dir(&a.common)?;
    let coef_path = dir.join("fit_coefficients.csv");
    let mut w = BufWriter::new(File::create(&coef_path).map_err(|e| io_err(&coef_path, e))?);
    let write = |w: &mut BufWriter<File>, s: String| w.write_all(s.as_bytes()).map_err(|e| io_err(&coef_path, e));
    write(&mut w, "index,coefficient\n".into())?;
    for (i, c) in result.coefficients.iter().enumerate() {
        write(&mut w, format!("{},{}\n", i + 1, fmt_float(*c)))?;
    }
    w.flush().map_err(|e| io_err(&coef_path, e))?;

    let grid_path = dir.join("fit_grid.csv");
    let mut w = BufWriter::new(File::create(&grid_path).map_err(|e| io_err(&grid_path, e))?);
    let mut text = String::from("x,fitted\n");
    for (t, v) in result.eval_grid(grid)? {
        text.push_str(&format!("{},{}\n", fmt_float(lo + t * (hi - lo)), fmt_float(v)));
    }
    w.write_all(text.as_bytes()).map_err(|e| io_err(&grid_path, e))?;
    w.flush().map_err(|e| io_err(&grid_path, e))?;

    let mut max_resid: f64 = 0.0;
    for (t, y) in u.iter().zip(&ys) {
        max_resid = max_resid.max((result.eval(*t)? - y).abs());
    }
    println!("m={m} K={k} samples={} active={}", xs.len(), result.active);
    println!("objective={} max_residual={}", fmt_float(result.objective), fmt_float(max_resid));
    println!("shape_feasible={}", result.is_shape_feasible());
    Ok(if result.is_shape_feasible() { EXIT_PASS } else { EXIT_FAILED_CHECK })
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let cfg = load(&a.config, &["truth", "sigma", "n", "seed", "design", "c-omega"])?;
    let truth = truth_by_name(&require(a.truth, cfg.string("truth"), "truth")?)?;
    let sigma = pick(a.sigma, cfg.f64("sigma"), 0.0)?;
    let n = require(a.n, cfg.usize("n"), "n")?;
    let design_kind = parse_mesh(&pick(a.design, cfg.string("design"), "uniform".into())?)?;
    let seed = match (a.seed, cfg.u64("seed")?) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) if sigma == 0.0 && design_kind == Mesh::Uniform => 0,
        _ => return Err(Error::Argument("--seed is required for noisy or random-design simulations".into())),
    };
    let design = match design_kind {
        Mesh::Uniform => DesignPoints::uniform(n)?,
        Mesh::Random => {
            let c_omega = pick(a.c_omega, cfg.f64("c-omega"), super::DEFAULT_C_OMEGA)?;
            sample_design(n, c_omega, &mut Stream::new(seed, 1))?
        }
    };
    let y = simulate_model(|x| truth.eval(x), &design, sigma, seed)?;
    let mut text = String::from("x,y\n");
    for (x, y) in design.points().iter().zip(&y) {
        text.push_str(&format!("{},{}\n", fmt_float(*x), fmt_float(*y)));
    }
    match a.output {
        Some(p) => std::fs::write(&p, text).map_err(|e| io_err(&p, e))?,
        None => print!("{text}"),
    }
    Ok(EXIT_PASS)
}

/// Write `<name>.csv` and `<name>_summary.json`, print the table and map
/// the outcome to an exit code.
fn finish<C: Serialize>(common: &Common, name: &str, config: &C, records: &[ResultRecord], started: Instant) -> Result<i32> {
    let dir = out_dir(common)?;
    let csv_path = dir.join(format!("{name}.csv"));
    let file = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_csv(records, BufWriter::new(file))?;
    let config = serde_json::to_value(config).map_err(|e| Error::Inconsistent(e.to_string()))?;
    let summary = summarize(name, config, records, started.elapsed().as_secs_f64());
    let json_path = dir.join(format!("{name}_summary.json"));
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Inconsistent(e.to_string()))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| io_err(&json_path, e))?;
    print!("{}", render_table(records));
    Ok(exit_code(records))
}

pub fn exit_code(records: &[ResultRecord]) -> i32 {
    if records.iter().any(|r| r.status == Status::Fail) {
        EXIT_FAILED_CHECK
    } else {
        EXIT_PASS
    }
}

/// One row per (experiment, statement) with status counts and the worst
/// margin.
pub fn render_table(records: &[ResultRecord]) -> String {
    use std::collections::BTreeMap;
    let mut rows: BTreeMap<(String, String), [usize; 4]> = BTreeMap::new();
    let mut worst: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in records {
        let key = (r.experiment.clone(), r.statement.clone());
        let c = rows.entry(key.clone()).or_default();
        c[r.status as usize] += 1;
        if r.status != Status::Info && r.margin.is_finite() {
            let w = worst.entry(key).or_insert(f64::INFINITY);
            *w = w.min(r.margin);
        }
    }
    let mut out = format!(
        "{:<12} {:<32} {:>6} {:>6} {:>6} {:>6} {:>12}\n",
        "experiment", "statement", "pass", "fail", "flag", "info", "worst margin"
    );
    for ((exp, stmt), c) in &rows {
        let margin = worst
            .get(&(exp.clone(), stmt.clone()))
            .map_or("-".to_string(), |m| format!("{m:.3e}"));
        out.push_str(&format!(
            "{exp:<12} {stmt:<32} {:>6} {:>6} {:>6} {:>6} {margin:>12}\n",
            c[Status::Pass as usize],
            c[Status::Fail as usize],
            c[Status::Flag as usize],
            c[Status::Info as usize]
        ));
    }
    let failed = records.iter().filter(|r| r.status == Status::Fail).count();
    out.push_str(&format!(
        "{} records, {failed} failed\n",
        records.len()
    ));
    out
}

fn cmd_bounds(a: BoundsArgs) -> Result<i32> {
    let keys = [
        "m", "max-k", "seed", "samples", "grid-samples", "n", "c-kappa-1", "c-kappa-2", "c-omega", "j-values", "max-grid",
    ];
    let f = load(&a.common.config, &keys)?;
    let d = BoundConfig::default();
    let cfg = BoundConfig {
        m: pick(a.m, f.usize("m"), d.m)?,
        max_k: pick(a.max_k, f.usize("max-k"), d.max_k)?,
        seed: pick(a.seed, f.u64("seed"), d.seed)?,
        samples: pick(a.samples, f.usize("samples"), d.samples)?,
        grid_samples: pick(a.grid_samples, f.usize("grid-samples"), d.grid_samples)?,
        n: pick(a.n, f.usize("n"), d.n)?,
        c_kappa_1: pick(a.c_kappa_1, f.f64("c-kappa-1"), d.c_kappa_1)?,
        c_kappa_2: pick(a.c_kappa_2, f.f64("c-kappa-2"), d.c_kappa_2)?,
        c_omega: pick(a.c_omega, f.f64("c-omega"), d.c_omega)?,
        j_values: pick(a.j_values, f.usize_list("j-values"), d.j_values.clone())?,
        max_grid: pick(a.max_grid, f.usize("max-grid"), d.max_grid)?,
    };
    let started = Instant::now();
    let records = run_bound_suite(&cfg)?;
    finish(&a.common, "bounds", &cfg, &records, started)
}

fn cmd_gramian(a: GramianArgs) -> Result<i32> {
    let keys = [
        "m-list", "k-list", "knots-per-cell", "alphas", "seed", "c-kappa-1", "c-kappa-2", "plateau-low",
        "plateau-high", "plateau-tol", "grid-k-list", "grid-samples", "max-grid",
    ];
    let f = load(&a.common.config, &keys)?;
    let d = GramianSweepConfig::default();
    let cfg = GramianSweepConfig {
        m_list: pick(a.m_list, f.usize_list("m-list"), d.m_list.clone())?,
        k_list: pick(a.k_list, f.usize_list("k-list"), d.k_list.clone())?,
        knots_per_cell: pick(a.knots_per_cell, f.usize("knots-per-cell"), d.knots_per_cell)?,
        alphas_per_knots: pick(a.alphas, f.usize("alphas"), d.alphas_per_knots)?,
        seed: pick(a.seed, f.u64("seed"), d.seed)?,
        c_kappa_1: pick(a.c_kappa_1, f.f64("c-kappa-1"), d.c_kappa_1)?,
        c_kappa_2: pick(a.c_kappa_2, f.f64("c-kappa-2"), d.c_kappa_2)?,
        plateau_low: pick(a.plateau_low, f.usize("plateau-low"), d.plateau_low)?,
        plateau_high: pick(a.plateau_high, f.usize("plateau-high"), d.plateau_high)?,
        plateau_tol: pick(a.plateau_tol, f.f64("plateau-tol"), d.plateau_tol)?,
        grid_k_list: pick(a.grid_k_list, f.usize_list("grid-k-list"), d.grid_k_list.clone())?,
        grid_samples: pick(a.grid_samples, f.usize("grid-samples"), d.grid_samples)?,
        max_grid: pick(a.max_grid, f.usize("max-grid"), d.max_grid)?,
    };
    let started = Instant::now();
    let result = gramian_sweep(&cfg)?;
    for (m, rho) in &result.rho {
        println!("rho_hat[m={m}] = {}", fmt_float(*rho));
    }
    finish(&a.common, "gramian", &cfg, &result.records, started)
}

fn cmd_lipschitz(a: LipschitzArgs) -> Result<i32> {
    let keys = [
        "m", "k-list", "n-list", "mesh", "draws", "seed", "probe-pairs", "c-kappa-1", "c-kappa-2", "c-omega", "rho",
        "ceiling-slack", "plateau-tol",
    ];
    let f = load(&a.common.config, &keys)?;
    let d = LipschitzConfig::default();
    let mesh = match a.mesh {
        Some(s) => parse_mesh(&s)?,
        None => f.string("mesh")?.map_or(Ok(d.mesh), |s| parse_mesh(&s))?,
    };
    let rho = match a.rho {
        Some(r) => Some(r),
        None => f.f64("rho")?,
    };
    let cfg = LipschitzConfig {
        m: pick(a.m, f.usize("m"), d.m)?,
        k_list: pick(a.k_list, f.usize_list("k-list"), d.k_list.clone())?,
        n_list: pick(a.n_list, f.usize_list("n-list"), d.n_list.clone())?,
        mesh,
        draws: pick(a.draws, f.usize("draws"), d.draws)?,
        seed: pick(a.seed, f.u64("seed"), d.seed)?,
        probe_pairs: pick(a.probe_pairs, f.usize("probe-pairs"), d.probe_pairs)?,
        c_kappa_1: pick(a.c_kappa_1, f.f64("c-kappa-1"), d.c_kappa_1)?,
        c_kappa_2: pick(a.c_kappa_2, f.f64("c-kappa-2"), d.c_kappa_2)?,
        c_omega: pick(a.c_omega, f.f64("c-omega"), d.c_omega)?,
        rho,
        ceiling_slack: pick(a.ceiling_slack, f.f64("ceiling-slack"), d.ceiling_slack)?,
        plateau_tol: pick(a.plateau_tol, f.f64("plateau-tol"), d.plateau_tol)?,
    };
    let started = Instant::now();
    let records = lipschitz_sweep(&cfg)?;
    finish(&a.common, "lipschitz", &cfg, &records, started)
}

fn cmd_rates(a: RatesArgs) -> Result<i32> {
    let keys = [
        "kind", "m", "truth", "n-list", "k-list", "q", "sigma", "replicates", "seed", "mesh", "c-kappa-1", "c-kappa-2",
        "c-omega", "grid",
    ];
    let f = load(&a.common.config, &keys)?;
    let d = RateConfig::default();
    let kind = RateKind::parse(&pick(a.kind, f.string("kind"), "bias".into())?)?;
    let m = pick(a.m, f.usize("m"), d.m)?;
    let truth = match a.truth {
        Some(t) => truth_by_name(&t)?,
        None => match f.string("truth")? {
            Some(t) => truth_by_name(&t)?,
            None => default_truth(m)?,
        },
    };
    let seed = match (a.seed, f.u64("seed")?) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) if kind == RateKind::Bias => d.seed,
        _ => return Err(Error::Argument("--seed is required for stochastic and total-risk experiments".into())),
    };
    let n_list = match a.n_list {
        Some(v) => Some(v),
        None => f.usize_list("n-list")?,
    };
    let k_list = match a.k_list {
        Some(v) => Some(v),
        None => f.usize_list("k-list")?,
    };
    let cells = match (n_list, k_list) {
        (None, None) => d.cells.clone(),
        (Some(ns), Some(ks)) if ns.len() == ks.len() => ns.into_iter().zip(ks).collect(),
        (Some(_), Some(_)) => return Err(Error::Argument("n-list and k-list must have equal lengths".into())),
        (Some(ns), None) => {
            let q = pick(a.q, f.f64("q"), 2.0 * truth.holder().gamma + 1.0)?;
            schedule(&ns, q)?
        }
        (None, Some(_)) => return Err(Error::Argument("k-list needs a matching n-list".into())),
    };
    let mesh = match a.mesh {
        Some(s) => parse_mesh(&s)?,
        None => f.string("mesh")?.map_or(Ok(d.mesh), |s| parse_mesh(&s))?,
    };
    let sigma_default = if kind == RateKind::Bias { 0.0 } else { 0.2 };
    let cfg = RateConfig {
        kind,
        m,
        truth: truth.name.to_string(),
        cells,
        sigma: pick(a.sigma, f.f64("sigma"), sigma_default)?,
        replicates: pick(a.replicates, f.usize("replicates"), if kind == RateKind::Bias { 1 } else { 100 })?,
        seed,
        mesh,
        c_kappa_1: pick(a.c_kappa_1, f.f64("c-kappa-1"), d.c_kappa_1)?,
        c_kappa_2: pick(a.c_kappa_2, f.f64("c-kappa-2"), d.c_kappa_2)?,
        c_omega: pick(a.c_omega, f.f64("c-omega"), d.c_omega)?,
        grid: pick(a.grid, f.usize("grid"), d.grid)?,
    };
    let started = Instant::now();
    let records = rate_experiment(&cfg)?;
    finish(&a.common, "rates", &cfg, &records, started)
}

fn cmd_report(a: ReportArgs) -> Result<i32> {
    let mut all = Vec::new();
    for path in &a.files {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let records = read_csv(file).map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?;
        all.extend(records);
    }
    print!("{}", render_table(&all));
    Ok(exit_code(&all))
}

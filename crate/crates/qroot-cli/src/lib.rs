//! Batch experiment runner for the `qroot` simulator.
//!
//! Each command reads a JSON config, calls into the library and writes its
//! results into the output directory: JSON for reports and verdicts, CSV for
//! series. Wall-clock metadata goes to a `.meta.json` sidecar so the primary
//! artifacts are reproducible byte for byte from config and seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use qroot::block_encoding::BlockEncoding;
use qroot::circulant_pde::{circulant_eigenvalues, circulant_encode, poisson_periodic_solve, CirculantSpec};
use qroot::fit;
use qroot::newton_solver::{iteration_cost, solve, solve_lm, NewtonConfig, SolveReport};
use qroot::nonlinear_system::{random_shared_form, FunctionFamily};
use qroot::physics_apps::{
    equilibrium_energy, lyapunov_estimate, simulate_chain, simulate_first_order_chain, solve_equilibrium,
    LyapunovConfig, MassChainSpec, Sampling, TimeGrid, TrajectorySolver,
};
use qroot::root_dissect::{
    classical_scan, dissect, figure_cubic, GridSpec, MultivariatePolynomial, SampleGrid, DEFAULT_EPS,
    DEFAULT_ZERO_TOL,
};
use qroot::C64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Dissect,
    Newton,
    Lm,
    Linear,
    Circulant,
    Poisson,
    Masses,
    Dynamics,
    Lyapunov,
    Scaling,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dissect => "dissect",
            Command::Newton => "newton",
            Command::Lm => "lm",
            Command::Linear => "linear",
            Command::Circulant => "circulant",
            Command::Poisson => "poisson",
            Command::Masses => "masses",
            Command::Dynamics => "dynamics",
            Command::Lyapunov => "lyapunov",
            Command::Scaling => "scaling",
        }
    }
}

/// Command line of the `qroot` binary.
#[derive(Clone, Debug, Parser, Serialize, Deserialize)]
#[command(name = "qroot", about = "Run qroot experiments from JSON configs")]
pub struct ExperimentConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON input for the command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "qroot-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the command's accuracy parameter.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Scaling suite: dissect-logn, newton or constant.
    #[arg(long)]
    pub suite: Option<String>,
}

/// Files written by a run, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
}

/// Deterministic per-item generator derived from the experiment seed.
pub fn sub_rng(seed: u64, item: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item);
    rng
}

fn read_config<T: for<'de> Deserialize<'de>>(cfg: &ExperimentConfig) -> CliResult<T> {
    let path = cfg
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("`{}` needs --config <path>", cfg.command.name())))?;
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.display().to_string(), message: e.to_string() })
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(v).expect("serializable");
        s.push('\n');
        self.put(name, s.as_bytes())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(numerical)?;
        for r in rows {
            w.write_record(r).map_err(numerical)?;
        }
        let bytes = w.into_inner().map_err(numerical)?;
        self.put(name, &bytes)
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Deserialize)]
struct DissectInput {
    polynomial: MultivariatePolynomial,
    grid: GridSpec,
    #[serde(default)]
    eps: Option<f64>,
    #[serde(default)]
    zero_tol: Option<f64>,
}

#[derive(Deserialize)]
struct NewtonInput {
    system: FunctionFamily,
    x0: Vec<f64>,
    #[serde(default, rename = "T")]
    t: Option<usize>,
    #[serde(default, rename = "Lambda")]
    lambda: Option<f64>,
    #[serde(default)]
    damping: Option<f64>,
}

#[derive(Deserialize)]
struct LinearInput {
    matrix: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    #[serde(default)]
    x0: Option<Vec<f64>>,
    #[serde(default, rename = "T")]
    t: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Row {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

#[derive(Deserialize)]
struct CirculantInput {
    first_row: Row,
}

#[derive(Deserialize)]
struct PoissonInput {
    g: Vec<f64>,
    dx: f64,
    #[serde(default = "one")]
    order: usize,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
struct MassesInput {
    chain: MassChainSpec,
    x0: Vec<f64>,
    #[serde(default)]
    shots: Option<u64>,
}

#[derive(Deserialize)]
struct DynamicsInput {
    chain: MassChainSpec,
    grid: TimeGrid,
    x0: Vec<f64>,
    v0: Vec<f64>,
    #[serde(default)]
    first_order: bool,
}

#[derive(Deserialize)]
struct LyapunovInput {
    system: FunctionFamily,
    x0: Vec<f64>,
    x0_bar: Vec<f64>,
    grid: TimeGrid,
    lyapunov: LyapunovConfig,
}

#[derive(Deserialize, Default)]
struct ScalingInput {
    #[serde(default)]
    suite: Option<String>,
    #[serde(default)]
    sizes: Option<Vec<usize>>,
    #[serde(default)]
    repetitions: Option<usize>,
}

/// Runs one experiment and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    if let Some(eps) = cfg.eps {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(CliError::Usage(format!("--eps must lie in (0, 1/2), got {eps}")));
        }
    }
    let mut w = Writer::new(&cfg.out)?;
    let resolved = serde_json::to_value(cfg).expect("serializable");
    let name = cfg.command.name();
    log::info!("running `{name}` with seed {} into {}", cfg.seed, cfg.out.display());
    let summary = match cfg.command {
        Command::Dissect => run_dissect(cfg, &mut w)?,
        Command::Newton | Command::Lm => run_newton(cfg, &mut w)?,
        Command::Linear => run_linear(cfg, &mut w)?,
        Command::Circulant => run_circulant(cfg, &mut w)?,
        Command::Poisson => run_poisson(cfg, &mut w)?,
        Command::Masses => run_masses(cfg, &mut w)?,
        Command::Dynamics => run_dynamics(cfg, &mut w)?,
        Command::Lyapunov => run_lyapunov(cfg, &mut w)?,
        Command::Scaling => run_scaling(cfg, &mut w)?,
    };
    let name = match summary.get("suite").and_then(Value::as_str) {
        Some(suite) => format!("{name}_{suite}"),
        None => name.to_string(),
    };
    w.json(&format!("{name}.json"), &json!({ "config": resolved, "seed": cfg.seed, "result": summary }))?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    w.json(
        &format!("{name}.meta.json"),
        &json!({ "unix_time": stamp, "seed": cfg.seed, "version": env!("CARGO_PKG_VERSION") }),
    )?;
    Ok(RunOutcome { artifacts: w.files, summary })
}

fn run_dissect(cfg: &ExperimentConfig, _w: &mut Writer) -> CliResult<Value> {
    let input: DissectInput = read_config(cfg)?;
    let grid = input.grid.build().map_err(numerical)?;
    let eps = cfg.eps.or(input.eps).unwrap_or(DEFAULT_EPS);
    let tol = input.zero_tol.unwrap_or(DEFAULT_ZERO_TOL);
    let report = dissect(&grid, &input.polynomial, eps, tol).map_err(numerical)?;
    let scan = classical_scan(&grid, &input.polynomial, tol).map_err(numerical)?;
    Ok(json!({
        "verdict": report.verdict,
        "report": report,
        "classical_verdict": scan.verdict,
        "ledger_total": report.cost.total(),
        "classical_cost": scan.cost.total(),
    }))
}

fn newton_csv(w: &mut Writer, name: &str, r: &SolveReport) -> CliResult<()> {
    let rows: Vec<Vec<String>> = r
        .residuals
        .iter()
        .enumerate()
        .map(|(t, res)| {
            let step = t.checked_sub(1).and_then(|i| r.steps.get(i));
            vec![
                t.to_string(),
                num(*res),
                step.map_or(String::new(), |s| num(s.eps)),
                step.map_or(String::new(), |s| num(s.kappa)),
                step.map_or(String::new(), |s| num(s.cost.total())),
            ]
        })
        .collect();
    w.csv(name, &["iteration", "residual", "eps", "kappa", "ledger_total"], &rows)
}

fn solve_summary(r: &SolveReport) -> Value {
    json!({
        "x_final": r.x_final,
        "residual": r.residual,
        "iterations": r.steps.len(),
        "postselect_prob": r.postselect_prob,
        "state": r.state,
        "domain_escape": r.domain_escape,
        "ledger": r.total_cost,
        "ledger_total": r.total_cost.total(),
    })
}

fn run_newton(cfg: &ExperimentConfig, w: &mut Writer) -> CliResult<Value> {
    let input: NewtonInput = read_config(cfg)?;
    let eps = cfg.eps.unwrap_or(1e-6);
    let mut nc = NewtonConfig::for_family(&input.system, eps);
    if let Some(t) = input.t {
        nc.t = t;
    }
    if let Some(l) = input.lambda {
        nc.lambda = l;
    }
    let report = if cfg.command == Command::Lm {
        let damping = input.damping.ok_or_else(|| CliError::Usage("`lm` needs \"damping\" in the config".into()))?;
        solve_lm(&input.system, &input.x0, damping, &nc)
    } else {
        solve(&input.system, &input.x0, &nc)
    }
    .map_err(numerical)?;
    newton_csv(w, &format!("{}_iterates.csv", cfg.command.name()), &report)?;
    Ok(json!({ "newton": nc, "solve": solve_summary(&report) }))
}

fn run_linear(cfg: &ExperimentConfig, w: &mut Writer) -> CliResult<Value> {
    let input: LinearInput = read_config(cfg)?;
    let f = FunctionFamily::affine(&input.matrix, &input.rhs).map_err(numerical)?;
    let eps = cfg.eps.unwrap_or(1e-6);
    let mut nc = NewtonConfig::for_family(&f, eps);
    nc.t = input.t.unwrap_or(2);
    let x0 = input.x0.unwrap_or_else(|| vec![0.0; f.n]);
    let report = solve(&f, &x0, &nc).map_err(numerical)?;
    newton_csv(w, "linear_iterates.csv", &report)?;
    Ok(json!({ "newton": nc, "solve": solve_summary(&report) }))
}

fn run_circulant(cfg: &ExperimentConfig, w: &mut Writer) -> CliResult<Value> {
    let input: CirculantInput = read_config(cfg)?;
    let spec = match input.first_row {
        Row::Real(r) => CirculantSpec::from_real(&r),
        Row::Complex(c) => CirculantSpec::new(c),
    }
    .map_err(numerical)?;
    let lam = circulant_eigenvalues(&spec);
    let enc = circulant_encode(&spec).map_err(numerical)?;
    let err = enc.op.max_abs_diff(&spec.dense());
    let rows: Vec<Vec<String>> =
        lam.iter().enumerate().map(|(k, z)| vec![k.to_string(), num(z.re), num(z.im)]).collect();
    w.csv("circulant_eigenvalues.csv", &["k", "re", "im"], &rows)?;
    Ok(json!({
        "n": spec.n(),
        "alpha": enc.alpha,
        "ancillas": enc.ancillas,
        "reconstruction_error": err,
        "ledger": enc.cost,
        "ledger_total": enc.cost.total(),
    }))
}

fn run_poisson(cfg: &ExperimentConfig, w: &mut Writer) -> CliResult<Value> {
    let input: PoissonInput = read_config(cfg)?;
    let eps = cfg.eps.unwrap_or(1e-6);
    let (_, report) = poisson_periodic_solve(&input.g, input.dx, input.order, eps).map_err(numerical)?;
    let rows: Vec<Vec<String>> = report
        .solution
        .iter()
        .zip(&report.direct)
        .enumerate()
        .map(|(j, (u, d))| vec![j.to_string(), num(*u), num(*d)])
        .collect();
    w.csv("poisson_solution.csv", &["j", "solution", "direct"], &rows)?;
    w.csv(
        "poisson_costs.csv",
        &["n", "kappa_measured", "kappa_block", "ledger_total", "prior_modeled_cost"],
        &[vec![
            report.n.to_string(),
            num(report.kappa_measured),
            num(report.kappa_block),
            num(report.ledger_cost),
            num(report.prior_modeled_cost),
        ]],
    )?;
    Ok(json!({
        "kappa_measured": report.kappa_measured,
        "kappa_block": report.kappa_block,
        "max_error": report.max_error,
        "ledger_total": report.ledger_cost,
        "prior_modeled_cost": report.prior_modeled_cost,
    }))
}

fn run_masses(cfg: &ExperimentConfig, w: &mut Writer) -> CliResult<Value> {
    let input: MassesInput = read_config(cfg)?;
    let eps = cfg.eps.unwrap_or(1e-6);
    let eq = solve_equilibrium(&input.chain, &input.x0, eps).map_err(numerical)?;
    let sampling = match input.shots {
        Some(shots) => Sampling::Shots { shots, seed: cfg.seed },
        None => Sampling::Exact,
    };
    let bound = input.x0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let enc = BlockEncoding::diagonal_loader_bounded(&input.x0, bound).map_err(numerical)?;
    let energy = equilibrium_energy(&enc, &input.chain, sampling).map_err(numerical)?;
    let rows: Vec<Vec<String>> =
        eq.differences.iter().enumerate().map(|(i, y)| vec![i.to_string(), num(*y)]).collect();
    w.csv("masses_equilibrium.csv", &["i", "stretch"], &rows)?;
    Ok(json!({
        "equilibrium": eq,
        "initial_energy": energy,
        "ledger_total": eq.ledger_cost,
    }))
}

fn run_dynamics(cfg: &ExperimentConfig, w: &mut Writer) -> CliResult<Value> {
    let input: DynamicsInput = read_config(cfg)?;
    let traj = if input.first_order {
        simulate_first_order_chain(&input.chain, &input.grid, &input.x0, &input.v0, &TrajectorySolver::Classical)
            .map(|(t, _)| t)
    } else {
        simulate_chain(&input.chain, &input.grid, &input.x0, &input.v0, &TrajectorySolver::Classical)
    }
    .map_err(numerical)?;
    let n = input.chain.n();
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("y{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = traj
        .states
        .iter()
        .enumerate()
        .map(|(m, s)| std::iter::once(num(traj.time(m))).chain(s.iter().map(|v| num(*v))).collect())
        .collect();
    w.csv("dynamics_trajectory.csv", &header, &rows)?;
    Ok(json!({ "steps": traj.states.len() - 1, "final": traj.states.last() }))
}

fn run_lyapunov(cfg: &ExperimentConfig, w: &mut Writer) -> CliResult<Value> {
    let input: LyapunovInput = read_config(cfg)?;
    let mut lc = input.lyapunov.clone();
    if lc.shots.is_some() {
        lc.seed = cfg.seed;
    }
    let r = lyapunov_estimate(&input.system, &input.x0, &input.x0_bar, &input.grid, &lc, &TrajectorySolver::Classical)
        .map_err(numerical)?;
    let rows: Vec<Vec<String>> = r
        .d
        .iter()
        .zip(&r.d_renormalized)
        .enumerate()
        .map(|(k, (a, b))| vec![(k + 1).to_string(), num(*a), num(*b)])
        .collect();
    w.csv("lyapunov_separations.csv", &["k", "d_k", "d_k_renormalized"], &rows)?;
    Ok(serde_json::to_value(&r).expect("serializable"))
}

/// One measured point of a scaling study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub repetition: usize,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub points: Vec<ScalingPoint>,
    /// Per-size mean costs in order of `sizes`.
    pub means: Vec<(usize, f64)>,
    pub fit: Value,
}

pub const SUITES: [&str; 3] = ["dissect-logn", "newton", "constant"];

pub fn default_sizes(suite: &str) -> Option<Vec<usize>> {
    match suite {
        "dissect-logn" => Some((4..=12).map(|k| 1usize << k).collect()),
        "newton" => Some(vec![4, 8, 16, 32]),
        "constant" => Some(vec![4, 8, 16, 32, 64]),
        _ => None,
    }
}

fn measure(suite: &str, n: usize, rep: usize, seed: u64, eps: Option<f64>) -> CliResult<f64> {
    match suite {
        "dissect-logn" => {
            let grid = SampleGrid::uniform(-0.5, 0.5, n).map_err(numerical)?;
            let r = dissect(&grid, &figure_cubic(), eps.unwrap_or(DEFAULT_EPS), DEFAULT_ZERO_TOL).map_err(numerical)?;
            Ok(r.cost.total())
        }
        "newton" => {
            let mut rng = sub_rng(seed, ((n as u64) << 32) | rep as u64);
            let (f, _) = random_shared_form(n, &mut rng);
            let x = qroot::nonlinear_system::random_initial(n, &mut rng);
            let nc = NewtonConfig::for_family(&f, eps.unwrap_or(1e-6));
            Ok(iteration_cost(&f, &x, &nc).map_err(numerical)?.total())
        }
        "constant" => Ok(BlockEncoding::projector(0, 64).map_err(numerical)?.cost.total()),
        other => Err(CliError::Usage(format!("unregistered suite `{other}`; known: {}", SUITES.join(", ")))),
    }
}

/// Ledger costs over `sizes × repetitions` and the fit of the suite's claimed form.
pub fn scaling_suite(
    name: &str,
    sizes: &[usize],
    repetitions: usize,
    seed: u64,
    eps: Option<f64>,
) -> CliResult<SuiteResult> {
    if !SUITES.contains(&name) {
        return Err(CliError::Usage(format!("unregistered suite `{name}`; known: {}", SUITES.join(", "))));
    }
    if sizes.is_empty() || repetitions == 0 {
        return Err(CliError::Usage("a scaling suite needs at least one size and one repetition".into()));
    }
    let items: Vec<(usize, usize)> = sizes.iter().flat_map(|&n| (0..repetitions).map(move |r| (n, r))).collect();
    let points: Vec<ScalingPoint> = items
        .par_iter()
        .map(|&(n, rep)| measure(name, n, rep, seed, eps).map(|cost| ScalingPoint { n, repetition: rep, cost }))
        .collect::<CliResult<_>>()?;
    let means: Vec<(usize, f64)> = sizes
        .iter()
        .map(|&n| {
            let v: Vec<f64> = points.iter().filter(|p| p.n == n).map(|p| p.cost).collect();
            (n, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    let xs: Vec<f64> = means.iter().map(|m| m.0 as f64).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.1).collect();
    let fit = match name {
        "dissect-logn" => {
            let f = fit::log_quadratic(&xs, &ys).ok_or_else(|| numerical("fit failed"))?;
            let classical: Vec<f64> = xs.clone();
            json!({ "model": "a + b ln n + c ln^2 n", "coeffs": f.coeffs, "r_squared": f.r_squared,
                    "residuals": f.residuals, "classical_cost": classical })
        }
        "newton" => {
            let per_log: Vec<f64> = ys.iter().zip(&xs).map(|(c, n)| c / n.log2()).collect();
            let f = fit::loglog_slope(&xs, &per_log).ok_or_else(|| numerical("fit failed"))?;
            let raw = fit::loglog_slope(&xs, &ys).ok_or_else(|| numerical("fit failed"))?;
            json!({ "model": "ln(cost / log2 n) = a + b ln n", "exponent": f.coeffs[1], "r_squared": f.r_squared,
                    "residuals": f.residuals, "raw_exponent": raw.coeffs[1] })
        }
        _ => {
            let f = fit::linear(&xs, &ys).ok_or_else(|| numerical("fit failed"))?;
            json!({ "model": "a + b n", "slope": f.coeffs[1], "r_squared": f.r_squared, "residuals": f.residuals })
        }
    };
    Ok(SuiteResult { suite: name.to_string(), points, means, fit })
}

fn run_scaling(cfg: &ExperimentConfig, w: &mut Writer) -> CliResult<Value> {
    let input: ScalingInput = if cfg.config.is_some() { read_config(cfg)? } else { ScalingInput::default() };
    let name = cfg
        .suite
        .clone()
        .or(input.suite)
        .ok_or_else(|| CliError::Usage("`scaling` needs --suite <name>".into()))?;
    let sizes = match input.sizes {
        Some(s) => s,
        None => default_sizes(&name)
            .ok_or_else(|| CliError::Usage(format!("unregistered suite `{name}`; known: {}", SUITES.join(", "))))?,
    };
    let result = scaling_suite(&name, &sizes, input.repetitions.unwrap_or(1), cfg.seed, cfg.eps)?;
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| vec![p.n.to_string(), p.repetition.to_string(), num(p.cost), cfg.seed.to_string()])
        .collect();
    w.csv(&format!("scaling_{name}.csv"), &["n", "repetition", "ledger_cost", "seed"], &rows)?;
    Ok(serde_json::to_value(&result).expect("serializable"))
}

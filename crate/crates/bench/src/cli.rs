use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use confound_core::estimators::{estimate_all, EstimatorConfig, Method, RmtObjective};
use confound_core::model::{build_model, draw_observations, ground_truth, Confounding, ModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{samples_for, ExperimentGrid};
use crate::csvio::{fmt_float, read_dataset, write_dataset, write_model};
use crate::error::{BenchError, Result};
use crate::grid::{rows_to_csv, run_grid, summarize, summary_to_csv};
use crate::oracle_check::{run_suites, OracleSettings};

#[derive(Debug, Parser)]
#[command(name = "confound", version, about = "Confounding-strength estimators and Monte Carlo harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one model and dataset and write them as CSV files.
    Generate(GenerateArgs),
    /// Run every sample estimator on a dataset and print one CSV row.
    Estimate(EstimateArgs),
    /// Run a grid config; writes rows and a per-cell summary.
    Grid(GridArgs),
    /// Compare empirical curves with their limits.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Target confounding strength.
    #[arg(long, default_value_t = 0.5, conflicts_with = "theta")]
    zeta: f64,
    /// Fix θ = σ_α/σ_β instead of targeting ζ.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 1.2)]
    gamma_tilde: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    theta_cap: f64,
    /// Choose θ_RMT by minimizing the log-likelihood estimate with this
    /// many noise draws instead of the derivative root.
    #[arg(long)]
    loglik_draws: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `threads` from the config.
    #[arg(long)]
    threads: Option<usize>,
    /// Fill runtime_ms (makes the output run-dependent).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 on
/// usage errors, 2 on numerical failures.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a, out),
        Command::Estimate(a) => estimate(a, out),
        Command::Grid(a) => grid(a, out),
        Command::OracleCheck(a) => oracle_check(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<i32> {
    let confounding = match a.theta {
        Some(t) => Confounding::Theta(t),
        None => Confounding::Zeta(a.zeta),
    };
    let spec = ModelSpec { d: a.d, gamma_tilde: a.gamma_tilde, c: a.c, confounding, sigma_beta2: a.sigma_beta, sigma_eps2: 1.0 };
    if !(a.gamma > 0.0 && a.gamma < 1.0) {
        return Err(BenchError::Grid(format!("gamma {} outside (0, 1)", a.gamma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let model = build_model(&spec, &mut rng).map_err(as_usage)?;
    let truth = ground_truth(&model)?;
    let data = draw_observations(&model, samples_for(a.d, a.gamma), &mut rng)?;
    fs::create_dir_all(&a.out)?;
    write_dataset(&a.out.join("x.csv"), &a.out.join("y.csv"), data.x(), data.y())?;
    write_model(&a.out, &model, &truth)?;
    writeln!(out, "wrote {} (d={} n={} zeta={:.6})", a.out.display(), data.dim(), data.samples(), truth.zeta)?;
    Ok(0)
}

/// Invalid model knobs are the caller's fault, not a numerical failure.
fn as_usage(e: confound_core::Error) -> BenchError {
    match e {
        confound_core::Error::InvalidInput(msg) => BenchError::Grid(msg),
        other => BenchError::Numerical(other),
    }
}

pub const ESTIMATE_COLUMNS: [&str; 14] = [
    "d",
    "n",
    "gamma",
    "S",
    "tau_plugin",
    "tau_rmt",
    "theta_plugin",
    "theta_rmt",
    "zeta_plugin",
    "zeta_tcorr",
    "zeta_rmt",
    "degenerate_flag",
    "root_found_plugin",
    "root_found_rmt",
];

fn estimate(a: EstimateArgs, out: &mut dyn Write) -> Result<i32> {
    let (x, y) = read_dataset(&a.x, &a.y)?;
    let config = EstimatorConfig {
        theta_cap: a.theta_cap,
        rmt_objective: match a.loglik_draws {
            Some(draws) => RmtObjective::LogLikelihood { draws, seed: a.seed },
            None => RmtObjective::Derivative,
        },
        ..EstimatorConfig::default()
    };
    let est = estimate_all(x.as_ref(), &y, None, &config)?;
    let get = |m| est.get(m).expect("sample estimators always present");
    let (plg, tc, rmt) = (get(Method::Plugin), get(Method::TauCorrected), get(Method::Rmt));
    let degenerate = est.estimates.values().any(|e| e.degenerate);
    let row = [
        x.nrows().to_string(),
        x.ncols().to_string(),
        fmt_float(est.gamma),
        fmt_float(est.noise),
        fmt_float(plg.tau),
        fmt_float(tc.tau),
        fmt_float(plg.theta),
        fmt_float(rmt.theta),
        fmt_float(plg.zeta),
        fmt_float(tc.zeta),
        fmt_float(rmt.zeta),
        u8::from(degenerate).to_string(),
        u8::from(plg.diagnostics.root_found).to_string(),
        u8::from(rmt.diagnostics.root_found).to_string(),
    ];
    writeln!(out, "{}", ESTIMATE_COLUMNS.join(","))?;
    writeln!(out, "{}", row.join(","))?;
    Ok(0)
}

/// `results.csv` → `results.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.csv"))
}

fn grid(a: GridArgs, out: &mut dyn Write) -> Result<i32> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| BenchError::Parse { path: a.config.display().to_string(), msg: e.to_string() })?;
    let mut grid = ExperimentGrid::parse(&text)?;
    if a.threads.is_some() {
        grid.threads = a.threads;
    }
    grid.timings = a.timings;
    let path = a
        .out
        .or_else(|| grid.out_path.clone())
        .ok_or_else(|| BenchError::Grid("no output path: pass --out or set out_path".into()))?;
    let rows = run_grid(&grid)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, rows_to_csv(&rows))?;
    let summary = summary_path(&path);
    fs::write(&summary, summary_to_csv(&summarize(&rows)))?;
    let failed = rows.iter().filter(|r| r.status.flag().starts_with("err")).count();
    writeln!(out, "wrote {} rows to {} and {} ({failed} failed)", rows.len(), path.display(), summary.display())?;
    Ok(0)
}

fn oracle_check(a: OracleArgs, out: &mut dyn Write) -> Result<i32> {
    let checks = run_suites(&OracleSettings { d: a.d, seed: a.seed, tol: a.tol })?;
    for c in &checks {
        writeln!(out, "{}", c.line())?;
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    writeln!(out, "{} checks, {failed} failed", checks.len())?;
    Ok(if failed == 0 { 0 } else { 2 })
}

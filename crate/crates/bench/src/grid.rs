//! Seeded Monte Carlo sweeps over (d, γ) cells.

use std::fmt::Write as _;
use std::time::Instant;

use confound_core::estimators::{estimate_all, EstimatorConfig, Method, PopulationStats};
use confound_core::model::{build_model, draw_observations, ground_truth, Confounding, ModelSpec};
use confound_core::Error as CoreError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{samples_for, ExperimentGrid, ZetaMode};
use crate::csvio::fmt_float;
use crate::error::{BenchError, Result};

pub const COLUMNS: [&str; 25] = [
    "d",
    "n",
    "gamma",
    "gamma_tilde",
    "c",
    "replicate",
    "seed",
    "zeta_true",
    "zeta_pop",
    "zeta_plugin",
    "zeta_tcorr",
    "zeta_rmt",
    "tau_pop",
    "tau_plugin",
    "tau_rmt",
    "theta_true",
    "theta_pop",
    "theta_plugin",
    "theta_rmt",
    "sigma_alpha",
    "sigma_beta",
    "S",
    "degenerate_flag",
    "root_found_rmt",
    "runtime_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok { degenerate: bool },
    /// The replicate failed; the tag names the error kind.
    Failed(String),
}

impl RowStatus {
    pub fn flag(&self) -> String {
        match self {
            RowStatus::Ok { degenerate } => (if *degenerate { "1" } else { "0" }).to_string(),
            RowStatus::Failed(tag) => format!("err:{tag}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub d: usize,
    pub n: usize,
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub c: f64,
    pub replicate: usize,
    pub seed: u64,
    pub zeta_true: f64,
    pub zeta_pop: f64,
    pub zeta_plugin: f64,
    pub zeta_tcorr: f64,
    pub zeta_rmt: f64,
    pub tau_pop: f64,
    pub tau_plugin: f64,
    pub tau_rmt: f64,
    pub theta_true: f64,
    pub theta_pop: f64,
    pub theta_plugin: f64,
    pub theta_rmt: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub s: f64,
    pub status: RowStatus,
    pub root_found_rmt: bool,
    pub runtime_ms: u64,
}

impl GridRow {
    fn empty(spec: &ModelSpec, n: usize, gamma: f64, replicate: usize, seed: u64) -> Self {
        let nan = f64::NAN;
        Self {
            d: spec.d,
            n,
            gamma,
            gamma_tilde: spec.gamma_tilde,
            c: spec.c,
            replicate,
            seed,
            zeta_true: nan,
            zeta_pop: nan,
            zeta_plugin: nan,
            zeta_tcorr: nan,
            zeta_rmt: nan,
            tau_pop: nan,
            tau_plugin: nan,
            tau_rmt: nan,
            theta_true: nan,
            theta_pop: nan,
            theta_plugin: nan,
            theta_rmt: nan,
            sigma_alpha: nan,
            sigma_beta: spec.sigma_beta2,
            s: nan,
            status: RowStatus::Ok { degenerate: false },
            root_found_rmt: false,
            runtime_ms: 0,
        }
    }

    pub fn zeta(&self, method: Method) -> f64 {
        match method {
            Method::Population => self.zeta_pop,
            Method::Plugin => self.zeta_plugin,
            Method::TauCorrected => self.zeta_tcorr,
            Method::Rmt => self.zeta_rmt,
        }
    }

    pub fn to_csv_line(&self) -> String {
        let f = fmt_float;
        [
            self.d.to_string(),
            self.n.to_string(),
            f(self.gamma),
            f(self.gamma_tilde),
            f(self.c),
            self.replicate.to_string(),
            self.seed.to_string(),
            f(self.zeta_true),
            f(self.zeta_pop),
            f(self.zeta_plugin),
            f(self.zeta_tcorr),
            f(self.zeta_rmt),
            f(self.tau_pop),
            f(self.tau_plugin),
            f(self.tau_rmt),
            f(self.theta_true),
            f(self.theta_pop),
            f(self.theta_plugin),
            f(self.theta_rmt),
            f(self.sigma_alpha),
            f(self.sigma_beta),
            f(self.s),
            self.status.flag(),
            u8::from(self.root_found_rmt).to_string(),
            self.runtime_ms.to_string(),
        ]
        .join(",")
    }
}

pub fn rows_to_csv(rows: &[GridRow]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn error_tag(e: &CoreError) -> &'static str {
    match e {
        CoreError::InvalidInput(_) => "invalid_input",
        CoreError::SingularPoint(_) => "singular_point",
        CoreError::NoSolution(_) => "no_solution",
        CoreError::RankDeficient { .. } => "rank_deficient",
        CoreError::Degenerate(_) => "degenerate",
        CoreError::Objective { source, .. } => error_tag(source),
        CoreError::Eigensolver => "eigensolver",
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `master ⊕ hash(d-index, γ-index, replicate)`.
pub fn replicate_seed(master: u64, d_index: usize, gamma_index: usize, replicate: usize) -> u64 {
    let h = splitmix64(splitmix64(splitmix64(d_index as u64) ^ gamma_index as u64) ^ replicate as u64);
    master ^ h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOptions {
    pub estimator: EstimatorConfig,
    pub include_population: bool,
    pub timings: bool,
}

impl Default for ReplicateOptions {
    fn default() -> Self {
        Self { estimator: EstimatorConfig::default(), include_population: true, timings: false }
    }
}

/// Builds one model from `seed`, draws `round(d/γ)` samples and runs every
/// estimator. Failures are recorded in the row.
pub fn run_replicate(spec: &ModelSpec, gamma: f64, replicate: usize, seed: u64, opts: &ReplicateOptions) -> GridRow {
    let n = samples_for(spec.d, gamma);
    let mut row = GridRow::empty(spec, n, gamma, replicate, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let start = Instant::now();
    if let Err(e) = fill_row(&mut row, spec, n, &mut rng, opts) {
        row.status = RowStatus::Failed(error_tag(&e).to_string());
    }
    if opts.timings {
        row.runtime_ms = start.elapsed().as_millis() as u64;
    }
    row
}

fn fill_row(row: &mut GridRow, spec: &ModelSpec, n: usize, rng: &mut ChaCha8Rng, opts: &ReplicateOptions) -> Result<(), CoreError> {
    let model = build_model(spec, rng)?;
    let truth = ground_truth(&model)?;
    row.zeta_true = truth.zeta;
    row.tau_pop = truth.tau_pop;
    row.theta_true = truth.theta_true;
    row.sigma_alpha = model.sigma_alpha2();
    row.sigma_beta = model.sigma_beta2();

    let data = draw_observations(&model, n, rng)?;
    let pop = if opts.include_population { Some(PopulationStats::from_model(&model, &truth)?) } else { None };
    let est = estimate_all(data.x(), data.y(), pop.as_ref(), &opts.estimator)?;
    row.s = est.noise;
    let mut degenerate = false;
    for (method, e) in &est.estimates {
        degenerate |= e.degenerate;
        match method {
            Method::Population => (row.zeta_pop, row.theta_pop) = (e.zeta, e.theta),
            Method::Plugin => (row.zeta_plugin, row.tau_plugin, row.theta_plugin) = (e.zeta, e.tau, e.theta),
            Method::TauCorrected => (row.zeta_tcorr, row.tau_rmt) = (e.zeta, e.tau),
            Method::Rmt => {
                (row.zeta_rmt, row.theta_rmt) = (e.zeta, e.theta);
                row.root_found_rmt = e.diagnostics.root_found;
            }
        }
    }
    row.status = RowStatus::Ok { degenerate };
    Ok(())
}

/// Model knobs for one replicate; uniform mode draws ζ′ and σ_β from the
/// replicate's own stream.
pub fn replicate_spec(grid: &ExperimentGrid, d: usize, seed: u64) -> ModelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = grid.sigma_beta_range;
    let zeta = match grid.zeta_mode {
        ZetaMode::Fixed(z) => z,
        ZetaMode::Uniform => rng.gen::<f64>(),
    };
    let sigma_beta2 = if hi > lo { rng.gen_range(lo..hi) } else { hi };
    ModelSpec { d, gamma_tilde: grid.gamma_tilde, c: grid.c, confounding: Confounding::Zeta(zeta), sigma_beta2, sigma_eps2: 1.0 }
}

/// One row per (d, γ, replicate) in that nesting order, independent of the
/// thread count.
///
/// Switches faer to sequential kernels for the whole process: its parallel
/// reductions would otherwise split sums by pool size.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<GridRow>> {
    grid.validate()?;
    faer::set_global_parallelism(faer::Par::Seq);
    let opts = ReplicateOptions {
        estimator: EstimatorConfig { theta_cap: grid.theta_cap, ..EstimatorConfig::default() },
        include_population: grid.include_population,
        timings: grid.timings,
    };
    let mut tasks = Vec::new();
    for (di, &d) in grid.d_values.iter().enumerate() {
        for (gi, &gamma) in grid.gamma_values.iter().enumerate() {
            for r in 0..grid.replicates {
                tasks.push((d, gamma, r, replicate_seed(grid.master_seed, di, gi, r)));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.resolved_threads())
        .build()
        .map_err(|e| BenchError::Grid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(d, gamma, r, seed)| run_replicate(&replicate_spec(grid, d, seed), gamma, r, seed, &opts))
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub bias: f64,
    pub mae: f64,
    /// Standard error of the mean error; 0 for a single replicate.
    pub se: f64,
    /// Replicates with a finite estimate.
    pub valid: usize,
}

impl ErrorSummary {
    pub fn from_errors(errors: &[f64]) -> Self {
        let k = errors.len();
        if k == 0 {
            return Self { bias: f64::NAN, mae: f64::NAN, se: f64::NAN, valid: 0 };
        }
        // shifted by the first error so identical inputs give exactly zero spread
        let bias = errors[0] + errors.iter().map(|e| e - errors[0]).sum::<f64>() / k as f64;
        let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / k as f64;
        let se = if k > 1 {
            let var = errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Self { bias, mae, se, valid: k }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub d: usize,
    pub gamma: f64,
    pub rows: usize,
    /// Indexed like [`Method::ALL`].
    pub methods: [ErrorSummary; 4],
}

impl CellSummary {
    pub fn get(&self, method: Method) -> &ErrorSummary {
        let k = Method::ALL.iter().position(|&m| m == method).expect("method listed");
        &self.methods[k]
    }
}

/// Per-(d, γ) bias, MAE and standard error of `ζ_est − ζ_true`, cells in
/// order of first appearance.
pub fn summarize(rows: &[GridRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(usize, u64)> = Vec::new();
    for r in rows {
        let key = (r.d, r.gamma.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(d, g)| {
            let cell: Vec<&GridRow> = rows.iter().filter(|r| r.d == d && r.gamma.to_bits() == g).collect();
            let methods = Method::ALL.map(|m| {
                let errors: Vec<f64> =
                    cell.iter().map(|r| r.zeta(m) - r.zeta_true).filter(|e| e.is_finite()).collect();
                ErrorSummary::from_errors(&errors)
            });
            CellSummary { d, gamma: f64::from_bits(g), rows: cell.len(), methods }
        })
        .collect()
}

const SUMMARY_LABELS: [&str; 4] = ["pop", "plugin", "tcorr", "rmt"];

pub fn summary_to_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from("d,gamma,replicates");
    for label in SUMMARY_LABELS {
        let _ = write!(out, ",bias_{label},mae_{label},se_{label},valid_{label}");
    }
    out.push('\n');
    for c in cells {
        let _ = write!(out, "{},{},{}", c.d, fmt_float(c.gamma), c.rows);
        for s in &c.methods {
            let _ = write!(out, ",{},{},{},{}", fmt_float(s.bias), fmt_float(s.mae), fmt_float(s.se), s.valid);
        }
        out.push('\n');
    }
    out
}

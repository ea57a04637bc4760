//! Flat `key = value` experiment configs.

use std::path::PathBuf;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZetaMode {
    /// Every replicate targets the same ζ′.
    Fixed(f64),
    /// ζ′ ~ U[0, 1) per replicate.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub d_values: Vec<usize>,
    pub gamma_values: Vec<f64>,
    pub gamma_tilde: f64,
    pub c: f64,
    pub zeta_mode: ZetaMode,
    /// σ_β is drawn uniformly from this range per replicate.
    pub sigma_beta_range: (f64, f64),
    pub replicates: usize,
    pub master_seed: u64,
    pub theta_cap: f64,
    pub include_population: bool,
    pub out_path: Option<PathBuf>,
    /// `None` defers to `THREADS`, then to the machine.
    pub threads: Option<usize>,
    /// Record wall-clock runtimes; off by default so output is reproducible.
    pub timings: bool,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            d_values: vec![100, 250, 500, 1000],
            gamma_values: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            gamma_tilde: 1.2,
            c: 1.0 / 3.0,
            zeta_mode: ZetaMode::Uniform,
            sigma_beta_range: (0.0, 3.0),
            replicates: 25,
            master_seed: 0,
            theta_cap: 100.0,
            include_population: true,
            out_path: None,
            threads: None,
            timings: false,
        }
    }
}

pub fn samples_for(d: usize, gamma: f64) -> usize {
    (d as f64 / gamma).round() as usize
}

impl ExperimentGrid {
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = Self::default();
        let mut mode: Option<(usize, String)> = None;
        let mut zeta_fixed: Option<f64> = None;
        let (mut sb_min, mut sb_max) = grid.sigma_beta_range;

        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| BenchError::Config { line: line_no, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "d_values" => grid.d_values = parse_list(value).map_err(err)?,
                "gamma_values" => grid.gamma_values = parse_list(value).map_err(err)?,
                "gamma_tilde" => grid.gamma_tilde = parse_one(value).map_err(err)?,
                "c" => grid.c = parse_one(value).map_err(err)?,
                "zeta_mode" => mode = Some((line_no, value.to_string())),
                "zeta_fixed" => zeta_fixed = Some(parse_one(value).map_err(err)?),
                "sigma_beta_min" => sb_min = parse_one(value).map_err(err)?,
                "sigma_beta_max" => sb_max = parse_one(value).map_err(err)?,
                "replicates" => grid.replicates = parse_one(value).map_err(err)?,
                "master_seed" => grid.master_seed = parse_one(value).map_err(err)?,
                "theta_cap" => grid.theta_cap = parse_one(value).map_err(err)?,
                "include_population" => grid.include_population = parse_one(value).map_err(err)?,
                "out_path" => grid.out_path = Some(PathBuf::from(value)),
                "threads" => grid.threads = Some(parse_one(value).map_err(err)?),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }

        grid.sigma_beta_range = (sb_min, sb_max);
        grid.zeta_mode = match mode {
            None => match zeta_fixed {
                Some(z) => ZetaMode::Fixed(z),
                None => ZetaMode::Uniform,
            },
            Some((_, m)) if m == "uniform" => ZetaMode::Uniform,
            Some((line, m)) if m == "fixed" => ZetaMode::Fixed(
                zeta_fixed.ok_or_else(|| BenchError::Config { line, msg: "zeta_mode = fixed needs zeta_fixed".into() })?,
            ),
            Some((line, m)) => {
                return Err(BenchError::Config { line, msg: format!("zeta_mode must be `fixed` or `uniform`, got `{m}`") })
            }
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BenchError::Grid(msg));
        if self.d_values.is_empty() || self.gamma_values.is_empty() {
            return fail("d_values and gamma_values must be nonempty".into());
        }
        for &g in &self.gamma_values {
            if !(g > 0.0 && g < 1.0) {
                return fail(format!("gamma {g} outside (0, 1)"));
            }
        }
        for &d in &self.d_values {
            if d == 0 {
                return fail("d must be positive".into());
            }
            for &g in &self.gamma_values {
                if samples_for(d, g) <= d {
                    return fail(format!("d = {d}, gamma = {g} gives n <= d"));
                }
            }
        }
        if !(self.gamma_tilde >= 1.0 && self.gamma_tilde.is_finite()) {
            return fail(format!("gamma_tilde {} must be >= 1", self.gamma_tilde));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return fail(format!("c {} outside (0, 1)", self.c));
        }
        if let ZetaMode::Fixed(z) = self.zeta_mode {
            if !(0.0..1.0).contains(&z) {
                return fail(format!("zeta_fixed {z} outside [0, 1)"));
            }
        }
        let (lo, hi) = self.sigma_beta_range;
        if !(lo >= 0.0 && hi >= lo && hi > 0.0 && hi.is_finite()) {
            return fail(format!("sigma_beta range [{lo}, {hi}] invalid"));
        }
        if self.replicates == 0 {
            return fail("replicates must be >= 1".into());
        }
        if !(self.theta_cap > 0.0 && self.theta_cap.is_finite()) {
            return fail(format!("theta_cap {} must be positive", self.theta_cap));
        }
        Ok(())
    }

    /// Worker count: the `threads` key, else `THREADS`, else 0 (rayon's
    /// default).
    pub fn resolved_threads(&self) -> usize {
        self.threads
            .or_else(|| std::env::var("THREADS").ok().and_then(|v| v.trim().parse().ok()))
            .unwrap_or(0)
    }
}

fn parse_one<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse `{value}`"))
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value.split(',').map(|v| parse_one(v.trim())).collect()
}

//! Plain-text matrices: row-major CSV, no quoting, one `# key=value ...`
//! header line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use confound_core::model::{CausalModel, GroundTruth};
use faer::{Mat, MatRef};

use crate::error::{BenchError, Result};

/// Round-trippable float text (17 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_matrix(header: &str, m: MatRef<'_, f64>) -> String {
    let mut out = format!("# {header}\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_float(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

fn format_row(header: &str, v: &[f64]) -> String {
    let mut out = format!("# {header}\n");
    let cells: Vec<String> = v.iter().map(|&x| fmt_float(x)).collect();
    let _ = writeln!(out, "{}", cells.join(","));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub header: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

impl Parsed {
    pub fn header_usize(&self, key: &str) -> Option<usize> {
        self.header.iter().find(|(k, _)| k == key).and_then(|(_, v)| v.parse().ok())
    }
}

pub fn parse_matrix(text: &str, source: &str) -> Result<Parsed> {
    let err = |msg: String| BenchError::Parse { path: source.to_string(), msg };
    let mut header = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for item in rest.split_whitespace() {
                let (key, value) = item.split_once('=').ok_or_else(|| err(format!("bad header item `{item}`")))?;
                header.push((key.to_string(), value.to_string()));
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|_| err(format!("line {}: bad number `{c}`", k + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(err(format!("line {}: {} columns, expected {}", k + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    Ok(Parsed { header, rows })
}

fn read(path: &Path) -> Result<Parsed> {
    let text = fs::read_to_string(path)
        .map_err(|e| BenchError::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    parse_matrix(&text, &path.display().to_string())
}

/// Writes `x` (d×n, samples as columns) and `y` (one row of n values),
/// both headed `# d=<d> n=<n>`.
pub fn write_dataset(x_path: &Path, y_path: &Path, x: MatRef<'_, f64>, y: &[f64]) -> Result<()> {
    let header = format!("d={} n={}", x.nrows(), x.ncols());
    fs::write(x_path, format_matrix(&header, x))?;
    fs::write(y_path, format_row(&header, y))?;
    Ok(())
}

pub fn read_dataset(x_path: &Path, y_path: &Path) -> Result<(Mat<f64>, Vec<f64>)> {
    let px = read(x_path)?;
    let py = read(y_path)?;
    let bad = |path: &Path, msg: String| BenchError::Parse { path: path.display().to_string(), msg };
    let d = px.rows.len();
    let n = px.rows.first().map_or(0, Vec::len);
    if d == 0 || n == 0 {
        return Err(bad(x_path, "empty matrix".into()));
    }
    for (key, expected) in [("d", d), ("n", n)] {
        if let Some(v) = px.header_usize(key) {
            if v != expected {
                return Err(bad(x_path, format!("header {key}={v} but data has {expected}")));
            }
        }
    }
    let y: Vec<f64> = py.rows.concat();
    if y.len() != n {
        return Err(bad(y_path, format!("{} responses for {n} samples", y.len())));
    }
    let x = Mat::from_fn(d, n, |i, j| px.rows[i][j]);
    Ok((x, y))
}

/// Writes the model parameters and its ground truth under `dir`.
pub fn write_model(dir: &Path, model: &CausalModel, truth: &GroundTruth) -> Result<()> {
    let (d, l) = (model.dim(), model.latent_dim());
    fs::write(dir.join("mixing.csv"), format_matrix(&format!("d={d} l={l}"), model.mixing()))?;
    fs::write(dir.join("alpha.csv"), format_row(&format!("l={l}"), model.alpha()))?;
    fs::write(dir.join("beta.csv"), format_row(&format!("d={d}"), model.beta()))?;
    fs::write(dir.join("beta_stat.csv"), format_row(&format!("d={d}"), &truth.beta_stat))?;
    let mut t = String::from("key,value\n");
    for (k, v) in [
        ("zeta", truth.zeta),
        ("tau", truth.tau_pop),
        ("theta", truth.theta_true),
        ("sigma_stat2", truth.sigma_stat2),
        ("sigma_alpha", model.sigma_alpha2()),
        ("sigma_beta", model.sigma_beta2()),
        ("sigma_eps", model.sigma_eps2()),
    ] {
        let _ = writeln!(t, "{k},{}", fmt_float(v));
    }
    fs::write(dir.join("truth.csv"), t)?;
    Ok(())
}

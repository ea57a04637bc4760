//! Empirical-vs-limit comparisons behind `oracle-check`.

use confound_core::estimators::{ResolventProfile, SampleStats};
use confound_core::model::{draw_reduced_instance, sample_mp_eigenvalues, typical_beta_stat};
use confound_core::oracles::{f_plugin_limit, f_pop_limit, mixed_trace_limits, mp_mass, mp_moment, LimitSpectrum};
use confound_core::roots::brent;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub suite: &'static str,
    pub name: String,
    pub empirical: f64,
    pub limit: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn gap(&self) -> f64 {
        (self.empirical - self.limit).abs()
    }

    pub fn passed(&self) -> bool {
        self.gap() <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<10} {:<28} empirical={:.6} limit={:.6} gap={:.2e} tol={:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.empirical,
            self.limit,
            self.gap(),
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub d: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { d: 2000, seed: 1, tol: 0.05 }
    }
}

const C: f64 = 1.0 / 3.0;
const GAMMA: f64 = 0.5;
const GAMMA_TILDE: f64 = 1.2;
const THETA_STAR: f64 = 1.0;
const THETAS: [f64; 3] = [0.5, 1.0, 2.0];

fn check(suite: &'static str, name: String, empirical: f64, limit: f64, tolerance: f64) -> OracleCheck {
    OracleCheck { suite, name, empirical, limit, tolerance }
}

/// Statistical noise of a γ̃-model with σ_β = σ_ε = 1.
fn sigma_stat2(d: usize, theta_star: f64) -> f64 {
    1.0 + theta_star * ((GAMMA_TILDE * d as f64).round() - d as f64)
}

pub fn mp_moment_suite(s: &OracleSettings) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for c in [0.1, C, 0.9] {
        out.push(check("mp_moment", format!("mass c={c:.3}"), mp_mass(c), 1.0, 1e-8));
    }
    out.push(check("mp_moment", "inverse mean c=1/3".into(), mp_moment(C, 0.0, 1)?, 1.0 / (1.0 - C), 1e-8));
    let sample = sample_mp_eigenvalues(s.d, C, &mut ChaCha8Rng::seed_from_u64(s.seed))?;
    for theta in THETAS {
        for k in [1, 2] {
            let emp = sample.iter().map(|l| (l + theta).powi(-k)).sum::<f64>() / s.d as f64;
            out.push(check("mp_moment", format!("E[(l+{theta})^-{k}] sample"), emp, mp_moment(C, theta, k)?, s.tol));
        }
    }
    Ok(out)
}

/// Population derivative with β̃ ~ N(0, I + θ*Σ⁻¹) on an MP(1/3) spectrum,
/// plus the limit's root.
pub fn f_pop_suite(s: &OracleSettings) -> Result<Vec<OracleCheck>> {
    let nu = LimitSpectrum::marchenko_pastur(C)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut lambdas = sample_mp_eigenvalues(s.d, C, &mut rng)?;
    lambdas.sort_by(f64::total_cmp);
    let inst = draw_reduced_instance(&lambdas, THETA_STAR, 1.0, 1.0, s.d + 1, &mut rng)?;
    let profile = ResolventProfile::new(lambdas, &inst.beta_stat)?;
    let mut out = Vec::new();
    for theta in THETAS {
        let emp = profile.logprob(theta)?.1;
        out.push(check("f_pop", format!("dL/dtheta at {theta}"), emp, f_pop_limit(theta, THETA_STAR, &nu), s.tol));
    }
    let f = |t: f64| Ok(f_pop_limit(t, THETA_STAR, &nu));
    let (a, b) = (0.1 * THETA_STAR, 10.0 * THETA_STAR);
    let root = brent(f, a, b, f(a)?, f(b)?, 1e-15, 1e-13, 200)?.root;
    out.push(check("f_pop", "limit root".into(), root, THETA_STAR, 1e-6));
    Ok(out)
}

/// Σ = I so that the limiting sample spectrum is MP(γ); covers the
/// plug-in derivative and the mixed traces on one draw.
fn identity_sample(s: &OracleSettings) -> Result<SampleStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed);
    let n = (s.d as f64 / GAMMA).round() as usize;
    let inst = draw_reduced_instance(&vec![1.0; s.d], THETA_STAR, 1.0, sigma_stat2(s.d, THETA_STAR), n, &mut rng)?;
    Ok(SampleStats::new(inst.data.x(), inst.data.y())?)
}

pub fn f_plugin_suite(s: &OracleSettings) -> Result<Vec<OracleCheck>> {
    let stats = identity_sample(s)?;
    let mu = LimitSpectrum::marchenko_pastur(GAMMA)?;
    THETAS
        .iter()
        .map(|&theta| {
            let emp = stats.logprob_plugin(theta)?.1;
            let lim = f_plugin_limit(theta, THETA_STAR, GAMMA, GAMMA_TILDE, &mu)?;
            Ok(check("f_plugin", format!("dL/dtheta at {theta}"), emp, lim, s.tol))
        })
        .collect()
}

pub fn mixed_trace_suite(s: &OracleSettings) -> Result<Vec<OracleCheck>> {
    let stats = identity_sample(s)?;
    let values = stats.covariance_spectrum().eigenvalues().to_vec();
    let mu = LimitSpectrum::marchenko_pastur(GAMMA)?;
    let d = values.len() as f64;
    let mut out = Vec::new();
    for theta in THETAS {
        let first = values.iter().map(|l| l / (l + theta)).sum::<f64>() / d;
        let second = values.iter().map(|l| l / (l + theta).powi(2)).sum::<f64>() / d;
        let (a, b) = mixed_trace_limits(theta, GAMMA, &mu);
        out.push(check("mixed", format!("first at {theta}"), first, a, s.tol));
        out.push(check("mixed", format!("second at {theta}"), second, b, s.tol));
    }
    Ok(out)
}

pub fn run_suites(s: &OracleSettings) -> Result<Vec<OracleCheck>> {
    let mut out = f_pop_suite(s)?;
    out.extend(f_plugin_suite(s)?);
    out.extend(mixed_trace_suite(s)?);
    out.extend(mp_moment_suite(s)?);
    Ok(out)
}

/// Population side of a typical-β̃ instance, used by the population
/// consistency checks.
pub fn typical_profile(d: usize, theta_star: f64, seed: u64) -> Result<ResolventProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lambdas = sample_mp_eigenvalues(d, C, &mut rng)?;
    lambdas.sort_by(f64::total_cmp);
    let beta = typical_beta_stat(&lambdas, theta_star, 1.0, &mut rng)?;
    Ok(ResolventProfile::new(lambdas, &beta)?)
}

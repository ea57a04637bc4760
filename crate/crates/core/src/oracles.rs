//! Closed-form large-dimension limits used as test oracles.
//!
//! Nothing here touches the estimator code path: spectral moments come from
//! exact weighted sums or from adaptive quadrature against the
//! Marchenko–Pastur density, so agreement with the estimators is an
//! independent check.

use crate::error::{invalid, Error, Result};
use crate::quad::integrate;

/// A limiting spectral law.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitSpectrum {
    /// Atoms at `values` with probabilities `weights`.
    Discrete { values: Vec<f64>, weights: Vec<f64> },
    /// Marchenko–Pastur law with ratio `c ∈ (0, 1)`.
    MarchenkoPastur { c: f64 },
}

const QUAD_REL_TOL: f64 = 1e-12;

impl LimitSpectrum {
    pub fn point_mass(value: f64) -> Self {
        Self::Discrete { values: vec![value], weights: vec![1.0] }
    }

    /// Uniform weights over an empirical eigenvalue sample.
    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empirical spectrum needs at least one value"));
        }
        let w = 1.0 / values.len() as f64;
        let weights = vec![w; values.len()];
        Ok(Self::Discrete { values, weights })
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(invalid("values and weights must be nonempty and of equal length"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(invalid("weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self::Discrete { values, weights })
    }

    pub fn marchenko_pastur(c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(invalid(format!("Marchenko-Pastur ratio must lie in (0, 1), got {c}")));
        }
        Ok(Self::MarchenkoPastur { c })
    }

    /// `E_{λ∼law}[g(λ)]`
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        match self {
            Self::Discrete { values, weights } => values.iter().zip(weights).map(|(&l, &w)| w * g(l)).sum(),
            Self::MarchenkoPastur { c } => mp_expect(*c, g),
        }
    }

    /// `E[1/(λ+θ)^k]`; `k = 1` is `m(−θ)`, `k = 2` is `M(−θ)`.
    pub fn moment(&self, theta: f64, k: i32) -> f64 {
        self.expect(|l| (l + theta).powi(-k))
    }

    /// `Var[1/(λ+θ)]`, computed as a centered second moment.
    pub fn resolvent_variance(&self, theta: f64) -> f64 {
        let m = self.moment(theta, 1);
        self.expect(|l| {
            let r = 1.0 / (l + theta) - m;
            r * r
        })
    }
}

/// Expectation under the Marchenko–Pastur density.
///
/// With `λ = c₋ + (c₊ − c₋) sin²u` the square-root edges cancel against
/// the Jacobian and the integrand on `[0, π/2]` is smooth.
fn mp_expect(c: f64, g: impl Fn(f64) -> f64) -> f64 {
    let s = c.sqrt();
    let (lo, hi) = ((1.0 - s).powi(2), (1.0 + s).powi(2));
    let width = hi - lo;
    let scale = width * width / (std::f64::consts::PI * c);
    integrate(
        |u| {
            let (sn, cs) = u.sin_cos();
            let lambda = lo + width * sn * sn;
            g(lambda) * scale * sn * sn * cs * cs / lambda
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        QUAD_REL_TOL,
        1e-15,
    )
}

/// `E[1/(λ+θ)^k]` under MP(c).
pub fn mp_moment(c: f64, theta: f64, k: i32) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid(format!("Marchenko-Pastur ratio must lie in (0, 1), got {c}")));
    }
    if !(theta >= 0.0) || !(k == 1 || k == 2) {
        return Err(invalid("need theta >= 0 and k in {1, 2}"));
    }
    Ok(mp_expect(c, |l| (l + theta).powi(-k)))
}

/// Total mass of the MP(c) density.
pub fn mp_mass(c: f64) -> f64 {
    mp_expect(c, |_| 1.0)
}

/// Limit of the population log-likelihood derivative:
/// `(θ − θ*) · Var_ν[1/(λ+θ)] / E_ν[(λ+θ*)/(λ+θ)]`.
pub fn f_pop_limit(theta: f64, theta_star: f64, nu: &LimitSpectrum) -> f64 {
    let var = nu.resolvent_variance(theta);
    let ratio = nu.expect(|l| (l + theta_star) / (l + theta));
    (theta - theta_star) * var / ratio
}

fn moments_checked(theta: f64, mu: &LimitSpectrum) -> Result<(f64, f64, f64)> {
    let m = mu.moment(theta, 1);
    let big_m = mu.moment(theta, 2);
    let spread = big_m - m * m;
    if spread.abs() < 1e-12 {
        return Err(Error::Degenerate(format!("resolvent variance {spread:e} at theta = {theta}")));
    }
    Ok((m, big_m, spread))
}

/// Limit of the plug-in log-likelihood derivative over the limiting sample
/// spectrum `mu`.
pub fn f_plugin_limit(theta: f64, theta_star: f64, gamma: f64, gamma_tilde: f64, mu: &LimitSpectrum) -> Result<f64> {
    let (m, big_m, spread) = moments_checked(theta, mu)?;
    let denom = 1.0 - theta * m + (1.0 - 2.0 * gamma + gamma * gamma_tilde) * theta_star * m
        + gamma * theta * theta_star * m * m;
    if denom.abs() < 1e-12 {
        return Err(Error::Degenerate(format!("h denominator {denom:e} at theta = {theta}")));
    }
    let h = spread / denom;
    let bracket = theta - (1.0 + gamma * gamma_tilde) * theta_star
        + gamma * theta_star * (1.0 - theta * m) * (1.0 + big_m / spread);
    Ok(bracket * h)
}

/// `γ̃ − (1 − θ*m)(1 + M/(M − m²))` at `−θ*`; zero iff the plug-in root is
/// asymptotically unbiased.
pub fn plugin_consistency_condition(theta_star: f64, gamma_tilde: f64, mu: &LimitSpectrum) -> Result<f64> {
    let (m, big_m, spread) = moments_checked(theta_star, mu)?;
    Ok(gamma_tilde - (1.0 - theta_star * m) * (1.0 + big_m / spread))
}

/// Limits of `(1/d)Tr[(Σ̂+θ)⁻ᵏ Σ̂ Σ⁺]` for `k = 1, 2`.
pub fn mixed_trace_limits(theta: f64, gamma: f64, mu: &LimitSpectrum) -> (f64, f64) {
    let m = mu.moment(theta, 1);
    let big_m = mu.moment(theta, 2);
    let first = gamma * theta * m * m + (1.0 - gamma) * m;
    let second = -gamma * m * m + 2.0 * gamma * theta * m * big_m + (1.0 - gamma) * big_m;
    (first, second)
}

//! Population, plug-in, τ-corrected and RMT estimators of confounding
//! strength.
//!
//! Every resolvent functional is evaluated in a cached eigenbasis: the data
//! enter only through the sample covariance spectrum, the coordinates of β̂
//! in its eigenvectors, and the noise level `S`.

use std::collections::BTreeMap;
use std::fmt;

use faer::{Mat, MatRef, Side};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{invalid, Error, Result};
use crate::model::{gaussian_matrix, CausalModel, GroundTruth};
use crate::roots::brent;
use crate::spectral::{
    check_finite, eta_derivative, min_norm_with_factor, rank_tolerance, solve_eta, symmetric_eigen, CovarianceFactor,
    Spectrum, SymmetricEigen,
};

/// `ζ = τθ/(1 + τθ)`
pub fn zeta_from(tau: f64, theta: f64) -> f64 {
    let p = tau * theta;
    if p.is_infinite() {
        1.0
    } else {
        p / (1.0 + p)
    }
}

/// `ζ = 1 − 1/(1 + τθ)`, the form used for the τ-corrected estimate.
pub fn zeta_complement(tau: f64, theta: f64) -> f64 {
    1.0 - 1.0 / (1.0 + tau * theta)
}

/// `(1/d) Σ 1/λ` over a full-rank spectrum.
pub fn tau_from_spectrum(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("empty spectrum"));
    }
    let lmax = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let tol = rank_tolerance(values.len(), values.len(), lmax);
    let lmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lmin > tol) {
        return Err(Error::RankDeficient { min_eigenvalue: lmin, tolerance: tol });
    }
    Ok(values.iter().map(|l| 1.0 / l).sum::<f64>() / values.len() as f64)
}

/// A spectrum paired with the squared coordinates of a direction in its
/// eigenbasis. Evaluates the log-likelihood functional
/// `L(θ) = (1/d)Σ log(λ+θ) + log⟨u, Σ(Σ+θ)⁻¹u⟩` and its derivative.
#[derive(Debug, Clone)]
pub struct ResolventProfile {
    values: Vec<f64>,
    weights: Vec<f64>,
    energy: f64,
}

impl ResolventProfile {
    pub fn new(values: Vec<f64>, coords: &[f64]) -> Result<Self> {
        if values.len() != coords.len() {
            return Err(invalid("spectrum and coordinates differ in length"));
        }
        let energy: f64 = coords.iter().map(|c| c * c).sum();
        let weights = if energy > 0.0 { coords.iter().map(|c| c * c / energy).collect() } else { vec![0.0; coords.len()] };
        Ok(Self { values, weights, energy })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Squared norm of the direction.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `m(−θ) = (1/d) Σ 1/(λ+θ)`
    pub fn stieltjes(&self, theta: f64) -> f64 {
        self.values.iter().map(|l| 1.0 / (l + theta)).sum::<f64>() / self.values.len() as f64
    }

    /// `Q_k(θ) = ⟨u, Σ(Σ+θ)⁻ᵏ u⟩` for unit `u`.
    pub fn quadform(&self, theta: f64, k: i32) -> Result<f64> {
        if self.energy == 0.0 {
            return Err(Error::Degenerate("direction vector is zero".into()));
        }
        Ok(self.values.iter().zip(&self.weights).map(|(&l, &w)| w * l * (l + theta).powi(-k)).sum())
    }

    /// `(L(θ), ∂θL(θ))`
    pub fn logprob(&self, theta: f64) -> Result<(f64, f64)> {
        if !(theta >= 0.0) {
            return Err(invalid(format!("theta must be nonnegative, got {theta}")));
        }
        let q1 = self.quadform(theta, 1)?;
        let q2 = self.quadform(theta, 2)?;
        if !(q1 > 0.0) {
            return Err(Error::Degenerate(format!("quadratic form {q1:e} is not positive")));
        }
        let d = self.values.len() as f64;
        let logdet = self.values.iter().map(|l| (l + theta).ln()).sum::<f64>() / d;
        Ok((logdet + q1.ln(), self.stieltjes(theta) - q2 / q1))
    }

    /// `Var[1/(λ+θ)]` over the spectrum, centered.
    pub fn resolvent_variance(&self, theta: f64) -> f64 {
        let m = self.stieltjes(theta);
        let d = self.values.len() as f64;
        self.values.iter().map(|l| (1.0 / (l + theta) - m).powi(2)).sum::<f64>() / d
    }
}

/// Population inputs `(Σ, β̃)` for the oracle estimator.
#[derive(Debug, Clone)]
pub struct PopulationStats {
    profile: ResolventProfile,
    tau: f64,
}

impl PopulationStats {
    pub fn new(sigma: MatRef<'_, f64>, beta_stat: &[f64]) -> Result<Self> {
        check_finite(sigma, "Sigma")?;
        let eig = symmetric_eigen(sigma)?;
        Self::from_eigen(&eig, beta_stat)
    }

    pub fn from_eigen(eig: &SymmetricEigen, beta_stat: &[f64]) -> Result<Self> {
        if eig.vectors.nrows() != beta_stat.len() {
            return Err(invalid("beta_stat length does not match Sigma"));
        }
        let tau = tau_from_spectrum(&eig.values)?;
        let coords = eig.vectors.transpose() * faer::ColRef::from_slice(beta_stat);
        let coords: Vec<f64> = coords.iter().copied().collect();
        let profile = ResolventProfile::new(eig.values.clone(), &coords)?;
        if profile.energy() == 0.0 {
            return Err(Error::Degenerate("beta_stat is zero".into()));
        }
        Ok(Self { profile, tau })
    }

    pub fn from_model(model: &CausalModel, truth: &GroundTruth) -> Result<Self> {
        Self::from_eigen(model.covariance_eigen(), &truth.beta_stat)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn profile(&self) -> &ResolventProfile {
        &self.profile
    }

    pub fn logprob(&self, theta: f64) -> Result<(f64, f64)> {
        self.profile.logprob(theta)
    }
}

/// `(L^pop(θ), ∂θL^pop(θ))` from an explicit covariance.
pub fn logprob_pop(sigma: MatRef<'_, f64>, beta_stat: &[f64], theta: f64) -> Result<(f64, f64)> {
    PopulationStats::new(sigma, beta_stat)?.logprob(theta)
}

/// `m̂(−θ) = −(1/(γθ))(η/θ − γ + 1)` from the kernel spectrum.
fn stieltjes_from_kernel(kernel: &Spectrum, gamma: f64, theta: f64) -> Result<f64> {
    let eta = solve_eta(kernel, theta)?;
    Ok(-(eta / theta - gamma + 1.0) / (gamma * theta))
}

/// Everything the sample-side estimators need from `(X, Y)`.
#[derive(Debug, Clone)]
pub struct SampleStats {
    factor: CovarianceFactor,
    kernel: Spectrum,
    beta_hat: Vec<f64>,
    profile: ResolventProfile,
    coords: Vec<f64>,
    noise: f64,
    tau_hat: f64,
    gamma: f64,
}

/// Values of the RMT building blocks at one θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmtTerms {
    pub eta: f64,
    pub eta_prime: f64,
    pub stieltjes: f64,
    pub quadform: f64,
    pub quadform_derivative: f64,
}

impl RmtTerms {
    /// `h = m̂ − q₂/q`, the estimate of `∂θL^pop`.
    pub fn h(&self) -> f64 {
        (self.quadform * self.stieltjes - self.quadform_derivative) / self.quadform
    }
}

fn check_shapes(x: MatRef<'_, f64>, y: &[f64]) -> Result<()> {
    let (d, n) = (x.nrows(), x.ncols());
    if n != y.len() {
        return Err(invalid(format!("X has {n} columns but Y has {} entries", y.len())));
    }
    if d == 0 || d >= n {
        return Err(invalid(format!("need 0 < d < n, got d = {d}, n = {n}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("Y has a non-finite entry"));
    }
    Ok(())
}

fn full_rank_factor(x: MatRef<'_, f64>) -> Result<CovarianceFactor> {
    let factor = CovarianceFactor::from_data(x)?;
    if factor.rank() < factor.dim() {
        return Err(Error::RankDeficient { min_eigenvalue: factor.values()[0], tolerance: factor.tolerance() });
    }
    Ok(factor)
}

impl SampleStats {
    pub fn new(x: MatRef<'_, f64>, y: &[f64]) -> Result<Self> {
        check_shapes(x, y)?;
        let factor = full_rank_factor(x)?;
        let (d, n) = (x.nrows(), x.ncols());
        let gamma = d as f64 / n as f64;
        let beta_hat = min_norm_with_factor(&factor, x, y);
        let fitted = x.transpose() * faer::ColRef::from_slice(&beta_hat);
        let rss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let noise = rss / ((1.0 - gamma) * n as f64 * d as f64);
        let coords = factor.rotate(&beta_hat);
        let tau_hat = tau_from_spectrum(factor.values())?;
        let profile = ResolventProfile::new(factor.values().to_vec(), &coords)?;
        let kernel = factor.kernel_spectrum();
        Ok(Self { factor, kernel, beta_hat, profile, coords, noise, tau_hat, gamma })
    }

    /// Replaces the estimated noise level `S` with a known value.
    pub fn with_noise(mut self, noise: f64) -> Result<Self> {
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(invalid(format!("noise level must be finite and nonnegative, got {noise}")));
        }
        self.noise = noise;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn samples(&self) -> usize {
        self.factor.samples()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta_hat(&self) -> &[f64] {
        &self.beta_hat
    }

    pub fn covariance_spectrum(&self) -> Spectrum {
        self.factor.spectrum()
    }

    pub fn kernel_spectrum(&self) -> &Spectrum {
        &self.kernel
    }

    pub fn profile(&self) -> &ResolventProfile {
        &self.profile
    }

    /// `τ̂ = (1/d) Tr Σ̂⁻¹`
    pub fn tau_plugin(&self) -> f64 {
        self.tau_hat
    }

    /// `τ_RMT = (1 − γ) τ̂`
    pub fn tau_rmt(&self) -> f64 {
        (1.0 - self.gamma) * self.tau_hat
    }

    /// `S`, an estimate of `σ̃²/d`.
    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn stieltjes_estimate(&self, theta: f64) -> Result<f64> {
        stieltjes_from_kernel(&self.kernel, self.gamma, theta)
    }

    fn denominator(&self) -> Result<f64> {
        let d = self.dim() as f64;
        let energy = self.coords.iter().map(|c| c * c).sum::<f64>() / d;
        let den = energy - self.noise * self.gamma * self.tau_hat;
        if den < 1e-12 {
            return Err(Error::Degenerate(format!("signal energy {energy:e} is at or below the noise floor ({den:e})")));
        }
        Ok(den)
    }

    pub fn rmt_terms(&self, theta: f64) -> Result<RmtTerms> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid(format!("theta must be positive, got {theta}")));
        }
        let den = self.denominator()?;
        let eta = solve_eta(&self.kernel, theta)?;
        let eta_prime = eta_derivative(&self.kernel, theta, eta)?;
        let (g, s, d) = (self.gamma, self.noise, self.dim() as f64);
        let (mut first, mut second) = (0.0, 0.0);
        for (&l, &c) in self.factor.values().iter().zip(&self.coords) {
            let r = 1.0 / (l - eta);
            first += c * c * l * r;
            second += c * c * l * r * r;
        }
        let quadform = (first / d - s / theta - s * (1.0 - g) / eta) / den;
        let quadform_derivative =
            (eta_prime * second / d - s / (theta * theta) + s * eta_prime * (1.0 - g) / (eta * eta)) / den;
        let stieltjes = -(eta / theta - g + 1.0) / (g * theta);
        Ok(RmtTerms { eta, eta_prime, stieltjes, quadform, quadform_derivative })
    }

    /// Estimate of `⟨u, Σ(Σ+θ)⁻¹u⟩` with `u = β̃/‖β̃‖`.
    pub fn quadform_estimate(&self, theta: f64) -> Result<f64> {
        Ok(self.rmt_terms(theta)?.quadform)
    }

    /// Estimate of `⟨u, Σ(Σ+θ)⁻²u⟩`, obtained as `−d/dθ` of
    /// [`quadform_estimate`](Self::quadform_estimate).
    pub fn quadform_derivative_estimate(&self, theta: f64) -> Result<f64> {
        Ok(self.rmt_terms(theta)?.quadform_derivative)
    }

    pub fn h_rmt(&self, theta: f64) -> Result<f64> {
        let terms = self.rmt_terms(theta)?;
        if terms.quadform == 0.0 {
            return Err(Error::Degenerate(format!("quadform estimate vanishes at theta = {theta}")));
        }
        Ok(terms.h())
    }

    pub fn logprob_plugin(&self, theta: f64) -> Result<(f64, f64)> {
        self.profile.logprob(theta)
    }
}

pub fn tau_plugin(x: MatRef<'_, f64>) -> Result<f64> {
    let factor = full_rank_factor(x)?;
    tau_from_spectrum(factor.values())
}

pub fn tau_rmt(x: MatRef<'_, f64>) -> Result<f64> {
    let (d, n) = (x.nrows(), x.ncols());
    if d >= n {
        return Err(invalid(format!("need d < n, got d = {d}, n = {n}")));
    }
    Ok((1.0 - d as f64 / n as f64) * tau_plugin(x)?)
}

/// `S = (1 − γ)⁻¹ Yᵀ(I − X⁺X)Y/(nd)`. Works for rank-deficient `X`.
pub fn noise_estimate_s(x: MatRef<'_, f64>, y: &[f64]) -> Result<f64> {
    check_shapes(x, y)?;
    let factor = CovarianceFactor::from_data(x)?;
    let (d, n) = (x.nrows(), x.ncols());
    let beta = min_norm_with_factor(&factor, x, y);
    let fitted = x.transpose() * faer::ColRef::from_slice(&beta);
    let rss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let gamma = d as f64 / n as f64;
    Ok(rss / ((1.0 - gamma) * n as f64 * d as f64))
}

pub fn stieltjes_estimate(x: MatRef<'_, f64>, theta: f64) -> Result<f64> {
    let (d, n) = (x.nrows(), x.ncols());
    if d == 0 || d >= n {
        return Err(invalid(format!("need 0 < d < n, got d = {d}, n = {n}")));
    }
    let factor = CovarianceFactor::from_data(x)?;
    stieltjes_from_kernel(&factor.kernel_spectrum(), d as f64 / n as f64, theta)
}

pub fn quadform_estimate(x: MatRef<'_, f64>, y: &[f64], theta: f64) -> Result<f64> {
    SampleStats::new(x, y)?.quadform_estimate(theta)
}

pub fn quadform_derivative_estimate(x: MatRef<'_, f64>, y: &[f64], theta: f64) -> Result<f64> {
    SampleStats::new(x, y)?.quadform_derivative_estimate(theta)
}

pub fn h_rmt(x: MatRef<'_, f64>, y: &[f64], theta: f64) -> Result<f64> {
    SampleStats::new(x, y)?.h_rmt(theta)
}

pub fn logprob_plugin(x: MatRef<'_, f64>, y: &[f64], theta: f64) -> Result<(f64, f64)> {
    SampleStats::new(x, y)?.logprob_plugin(theta)
}

/// `log θ + (1/d) log det(WWᵀ/(nθ)) + ((1−γ)/γ) log(1−γ) + 1` for
/// `W = X + √θ E`, with the given noise matrix `E`.
pub fn logdet_g1_with_noise(x: MatRef<'_, f64>, theta: f64, noise: MatRef<'_, f64>) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    let (d, n) = (x.nrows(), x.ncols());
    if d == 0 || d >= n {
        return Err(invalid(format!("need 0 < d < n, got d = {d}, n = {n}")));
    }
    if noise.nrows() != d || noise.ncols() != n {
        return Err(invalid("noise matrix shape differs from X"));
    }
    let root = theta.sqrt();
    let w = Mat::from_fn(d, n, |i, j| x[(i, j)] + root * noise[(i, j)]);
    let g = (&w * w.transpose()) * faer::Scale(1.0 / (n as f64 * theta));
    let llt = g.llt(Side::Lower).map_err(|_| Error::Degenerate("W Wᵀ is not positive definite".into()))?;
    let l = llt.L();
    let logdet: f64 = (0..d).map(|i| 2.0 * l[(i, i)].ln()).sum();
    let gamma = d as f64 / n as f64;
    Ok(theta.ln() + logdet / d as f64 + (1.0 - gamma) / gamma * (1.0 - gamma).ln() + 1.0)
}

/// g1 averaged over `draws` fresh standard-normal noise matrices.
pub fn logdet_estimate_g1<R: Rng + ?Sized>(x: MatRef<'_, f64>, theta: f64, draws: usize, rng: &mut R) -> Result<f64> {
    if draws == 0 {
        return Err(invalid("need at least one noise draw"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    let mut total = 0.0;
    for _ in 0..draws {
        let e = gaussian_matrix(x.nrows(), x.ncols(), 1.0, rng);
        total += logdet_g1_with_noise(x, theta, e.as_ref())?;
    }
    Ok(total / draws as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectiveKind {
    PopDerivative,
    PluginDerivative,
    RmtH,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaObjective {
    pub kind: ObjectiveKind,
    /// Upper end `C` of the search interval.
    pub search_cap: f64,
    /// Root accepted once `|f(θ)| ≤ tolerance`.
    pub tolerance: f64,
    /// Left end of the geometric scan.
    pub scan_start: f64,
    pub grid_points: usize,
}

impl ThetaObjective {
    pub fn new(kind: ObjectiveKind) -> Self {
        Self { kind, search_cap: 100.0, tolerance: 1e-12, scan_start: 1e-4, grid_points: 64 }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.search_cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.search_cap > 0.0 && self.search_cap.is_finite()) {
            return Err(invalid(format!("search cap must be positive, got {}", self.search_cap)));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if !(self.scan_start > 0.0 && self.scan_start < self.search_cap) {
            return Err(invalid("scan start must lie in (0, cap)"));
        }
        if self.grid_points < 2 {
            return Err(invalid("need at least two grid points"));
        }
        Ok(())
    }

    /// The geometric scan points, ending exactly at the cap.
    pub fn grid(&self) -> Vec<f64> {
        let ratio = (self.search_cap / self.scan_start).ln();
        let last = (self.grid_points - 1) as f64;
        (0..self.grid_points)
            .map(|k| if k + 1 == self.grid_points { self.search_cap } else { self.scan_start * (ratio * k as f64 / last).exp() })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootDiagnostics {
    pub root_found: bool,
    /// `|f(θ̂)|` at the returned root, NaN when none was found.
    pub objective_residual: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    /// Number of sign changes seen on the scan grid.
    pub sign_changes: usize,
}

/// Data for [`solve_theta`]; must match the objective kind.
#[derive(Debug, Clone, Copy)]
pub enum ThetaInputs<'a> {
    Population(&'a PopulationStats),
    Sample(&'a SampleStats),
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    root: f64,
    residual: f64,
    bracket: (f64, f64),
    upward: bool,
}

fn wrap(theta: f64, lo: f64, hi: f64) -> impl Fn(Error) -> Error {
    move |e| Error::Objective { theta, lo, hi, source: Box::new(e) }
}

/// Scans for sign changes and refines each with Brent's method.
fn find_candidates<F>(obj: &ThetaObjective, f: &mut F, evaluations: &mut usize) -> Result<(Vec<Candidate>, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let grid = obj.grid();
    let (lo, hi) = (obj.scan_start, obj.search_cap);
    let mut values = Vec::with_capacity(grid.len());
    for &t in &grid {
        values.push(f(t).map_err(wrap(t, lo, hi))?);
        *evaluations += 1;
    }
    let x_tol = 1e-8 * obj.search_cap;
    let mut out: Vec<Candidate> = Vec::new();
    let mut sign_changes = 0;
    for k in 0..grid.len() {
        let fk = values[k];
        if fk.abs() <= obj.tolerance {
            let before = if k > 0 { values[k - 1] } else { fk };
            let after = values.get(k + 1).copied().unwrap_or(fk);
            out.push(Candidate { root: grid[k], residual: fk.abs(), bracket: (grid[k], grid[k]), upward: after >= before });
            continue;
        }
        let Some(&fn1) = values.get(k + 1) else { break };
        if fn1.abs() <= obj.tolerance || fk.signum() == fn1.signum() {
            continue;
        }
        sign_changes += 1;
        let (a, b) = (grid[k], grid[k + 1]);
        let mut count = 0;
        let outcome = brent(
            |t| {
                count += 1;
                f(t).map_err(wrap(t, a, b))
            },
            a,
            b,
            fk,
            fn1,
            obj.tolerance,
            x_tol,
            200,
        )?;
        *evaluations += count;
        // A crossing through a pole shows up as a residual larger than
        // either end of the bracket.
        if outcome.value.abs() > obj.tolerance && outcome.value.abs() > fk.abs().min(fn1.abs()) {
            continue;
        }
        out.push(Candidate { root: outcome.root, residual: outcome.value.abs(), bracket: outcome.bracket, upward: fk < 0.0 });
    }
    Ok((out, sign_changes))
}

fn pick_by_score(candidates: &[Candidate], scores: &[f64]) -> Candidate {
    let mut best = 0;
    for i in 1..candidates.len() {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    candidates[best]
}

/// Relative values of `L` at each root from `∫ h dθ` (composite Simpson).
fn integrated_scores<F>(roots: &[f64], f: &mut F, evaluations: &mut usize) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut scores = vec![0.0; roots.len()];
    let panels = 32;
    for i in 1..roots.len() {
        let (a, b) = (roots[i - 1], roots[i]);
        let step = (b - a) / (2 * panels) as f64;
        let mut acc = 0.0;
        for j in 0..=2 * panels {
            let t = a + step * j as f64;
            let w = if j == 0 || j == 2 * panels { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(t).map_err(wrap(t, a, b))?;
            *evaluations += 1;
        }
        scores[i] = scores[i - 1] + acc * step / 3.0;
    }
    Ok(scores)
}

/// Root of the chosen θ-objective in `[scan_start, C]`, or `0` with
/// `root_found = false` if there is none.
///
/// Among several roots, minima of `L` (upward crossings) are preferred and
/// the one with the smallest `L` wins.
pub fn solve_theta(obj: &ThetaObjective, inputs: ThetaInputs<'_>) -> Result<(f64, RootDiagnostics)> {
    obj.validate()?;
    let mut evaluations = 0;
    let mut derivative = |t: f64| -> Result<f64> {
        match (obj.kind, inputs) {
            (ObjectiveKind::PopDerivative, ThetaInputs::Population(p)) => Ok(p.logprob(t)?.1),
            (ObjectiveKind::PluginDerivative, ThetaInputs::Sample(s)) => Ok(s.logprob_plugin(t)?.1),
            (ObjectiveKind::RmtH, ThetaInputs::Sample(s)) => s.h_rmt(t),
            _ => Err(invalid(format!("inputs do not match objective {:?}", obj.kind))),
        }
    };
    let (mut candidates, sign_changes) = find_candidates(obj, &mut derivative, &mut evaluations)?;
    if candidates.iter().any(|c| c.upward) {
        candidates.retain(|c| c.upward);
    }
    let none = RootDiagnostics {
        root_found: false,
        objective_residual: f64::NAN,
        bracket: (obj.scan_start, obj.search_cap),
        evaluations,
        sign_changes,
    };
    if candidates.is_empty() {
        return Ok((0.0, none));
    }

    let level = |t: f64| -> Result<f64> {
        match inputs {
            ThetaInputs::Population(p) => Ok(p.logprob(t)?.0),
            ThetaInputs::Sample(s) => Ok(s.logprob_plugin(t)?.0),
        }
    };
    let chosen = if candidates.len() == 1 {
        candidates[0]
    } else if obj.kind == ObjectiveKind::RmtH {
        let roots: Vec<f64> = candidates.iter().map(|c| c.root).collect();
        let scores = integrated_scores(&roots, &mut derivative, &mut evaluations)?;
        pick_by_score(&candidates, &scores)
    } else {
        let scores = candidates.iter().map(|c| level(c.root)).collect::<Result<Vec<_>>>()?;
        pick_by_score(&candidates, &scores)
    };
    let none = RootDiagnostics { evaluations, ..none };

    if obj.kind == ObjectiveKind::PluginDerivative && level(0.0)? < level(chosen.root)? {
        return Ok((0.0, none));
    }
    Ok((
        chosen.root,
        RootDiagnostics {
            root_found: true,
            objective_residual: chosen.residual,
            bracket: chosen.bracket,
            evaluations,
            sign_changes,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Population,
    Plugin,
    TauCorrected,
    Rmt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Population, Method::Plugin, Method::TauCorrected, Method::Rmt];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Population => "population",
            Method::Plugin => "plugin",
            Method::TauCorrected => "tau_corrected",
            Method::Rmt => "rmt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfoundingEstimate {
    pub method: Method,
    pub tau: f64,
    pub theta: f64,
    pub zeta: f64,
    /// Spectral dispersion of the resolvent at θ̂ fell below the threshold.
    pub degenerate: bool,
    pub diagnostics: RootDiagnostics,
}

impl ConfoundingEstimate {
    fn assemble(method: Method, tau: f64, theta: f64, degenerate: bool, diagnostics: RootDiagnostics) -> Self {
        let zeta = match method {
            Method::TauCorrected => zeta_complement(tau, theta),
            _ => zeta_from(tau, theta),
        };
        Self { method, tau, theta, zeta, degenerate, diagnostics }
    }
}

/// How θ_RMT is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmtObjective {
    /// Root of the deterministic `h_RMT`.
    Derivative,
    /// Grid minimization of `g1 + log q` with `draws` noise matrices drawn
    /// from `seed` and held fixed across θ.
    LogLikelihood { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub theta_cap: f64,
    pub scan_start: f64,
    pub grid_points: usize,
    pub tolerance: f64,
    pub degeneracy_threshold: f64,
    pub rmt_objective: RmtObjective,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            theta_cap: 100.0,
            scan_start: 1e-4,
            grid_points: 64,
            tolerance: 1e-12,
            degeneracy_threshold: 1e-10,
            rmt_objective: RmtObjective::Derivative,
        }
    }
}

impl EstimatorConfig {
    pub fn objective(&self, kind: ObjectiveKind) -> ThetaObjective {
        ThetaObjective {
            kind,
            search_cap: self.theta_cap,
            tolerance: self.tolerance,
            scan_start: self.scan_start,
            grid_points: self.grid_points,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimates {
    /// The noise estimate `S`.
    pub noise: f64,
    pub gamma: f64,
    pub estimates: BTreeMap<Method, ConfoundingEstimate>,
}

impl Estimates {
    pub fn get(&self, method: Method) -> Option<&ConfoundingEstimate> {
        self.estimates.get(&method)
    }
}

/// θ minimizing `g1(θ) + log q(θ)` over the scan grid, refined by golden
/// section in `log θ`.
fn rmt_loglik_theta(x: MatRef<'_, f64>, stats: &SampleStats, config: &EstimatorConfig, draws: usize, seed: u64) -> Result<(f64, RootDiagnostics)> {
    if draws == 0 {
        return Err(invalid("need at least one noise draw"));
    }
    let obj = config.objective(ObjectiveKind::RmtH);
    obj.validate()?;
    let mut rng = StdRng::seed_from_u64(seed);
    let noises: Vec<Mat<f64>> = (0..draws).map(|_| gaussian_matrix(x.nrows(), x.ncols(), 1.0, &mut rng)).collect();
    let mut evaluations = 0;
    let mut objective = |t: f64| -> Result<f64> {
        evaluations += 1;
        let q = stats.quadform_estimate(t)?;
        if !(q > 0.0) {
            return Err(Error::Degenerate(format!("quadform estimate {q:e} is not positive at theta = {t}")));
        }
        let mut g1 = 0.0;
        for e in &noises {
            g1 += logdet_g1_with_noise(x, t, e.as_ref())?;
        }
        Ok(g1 / draws as f64 + q.ln())
    };
    let grid = obj.grid();
    let mut values = Vec::with_capacity(grid.len());
    for &t in &grid {
        values.push(objective(t).map_err(wrap(t, obj.scan_start, obj.search_cap))?);
    }
    let best = (0..grid.len()).min_by(|&i, &j| values[i].total_cmp(&values[j])).expect("grid is nonempty");
    if best == 0 || best + 1 == grid.len() {
        let diag = RootDiagnostics {
            root_found: false,
            objective_residual: f64::NAN,
            bracket: (obj.scan_start, obj.search_cap),
            evaluations,
            sign_changes: 0,
        };
        return Ok((if best == 0 { 0.0 } else { obj.search_cap }, diag));
    }
    let (mut a, mut b) = (grid[best - 1].ln(), grid[best + 1].ln());
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c.exp())?, objective(d.exp())?);
    while b - a > 1e-8 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d.exp())?;
        }
    }
    let theta = (0.5 * (a + b)).exp();
    let residual = stats.h_rmt(theta).map(f64::abs).unwrap_or(f64::NAN);
    Ok((
        theta,
        RootDiagnostics { root_found: true, objective_residual: residual, bracket: (a.exp(), b.exp()), evaluations: evaluations + 1, sign_changes: 0 },
    ))
}

/// Runs every estimator on `(X, Y)`; the population estimate is included
/// when population inputs are supplied.
pub fn estimate_all(
    x: MatRef<'_, f64>,
    y: &[f64],
    population: Option<&PopulationStats>,
    config: &EstimatorConfig,
) -> Result<Estimates> {
    let stats = SampleStats::new(x, y)?;
    estimate_with_stats(x, &stats, population, config)
}

/// As [`estimate_all`] with precomputed sample statistics.
pub fn estimate_with_stats(
    x: MatRef<'_, f64>,
    stats: &SampleStats,
    population: Option<&PopulationStats>,
    config: &EstimatorConfig,
) -> Result<Estimates> {
    let flat = |profile: &ResolventProfile, theta: f64| profile.resolvent_variance(theta) < config.degeneracy_threshold;
    let mut estimates = BTreeMap::new();

    let (theta_plg, diag_plg) = solve_theta(&config.objective(ObjectiveKind::PluginDerivative), ThetaInputs::Sample(stats))?;
    let plugin_flat = flat(stats.profile(), theta_plg);
    estimates.insert(
        Method::Plugin,
        ConfoundingEstimate::assemble(Method::Plugin, stats.tau_plugin(), theta_plg, plugin_flat, diag_plg),
    );
    estimates.insert(
        Method::TauCorrected,
        ConfoundingEstimate::assemble(Method::TauCorrected, stats.tau_rmt(), theta_plg, plugin_flat, diag_plg),
    );

    let (theta_rmt, diag_rmt) = match config.rmt_objective {
        RmtObjective::Derivative => solve_theta(&config.objective(ObjectiveKind::RmtH), ThetaInputs::Sample(stats))?,
        RmtObjective::LogLikelihood { draws, seed } => rmt_loglik_theta(x, stats, config, draws, seed)?,
    };
    estimates.insert(
        Method::Rmt,
        ConfoundingEstimate::assemble(Method::Rmt, stats.tau_rmt(), theta_rmt, flat(stats.profile(), theta_rmt), diag_rmt),
    );

    if let Some(pop) = population {
        let (theta, diag) = solve_theta(&config.objective(ObjectiveKind::PopDerivative), ThetaInputs::Population(pop))?;
        estimates.insert(
            Method::Population,
            ConfoundingEstimate::assemble(Method::Population, pop.tau(), theta, flat(pop.profile(), theta), diag),
        );
    }
    Ok(Estimates { noise: stats.noise(), gamma: stats.gamma(), estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, draw_observations, ground_truth, ModelSpec};
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn gaussian_data(d: usize, n: usize, seed: u64) -> Mat<f64> {
        gaussian_matrix(d, n, 1.0, &mut rng(seed))
    }

    fn instance(d: usize, gamma: f64, zeta: f64, seed: u64) -> (CausalModel, GroundTruth, Mat<f64>, Vec<f64>) {
        let mut r = rng(seed);
        let model = build_model(&ModelSpec::new(d, zeta), &mut r).unwrap();
        let truth = ground_truth(&model).unwrap();
        let n = (d as f64 / gamma).round() as usize;
        let (x, y) = draw_observations(&model, n, &mut r).unwrap().into_parts();
        (model, truth, x, y)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn tau_trivial_spectra() {
        assert_eq!(tau_from_spectrum(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!((tau_from_spectrum(&[2.0, 0.5]).unwrap() - 1.25).abs() < 1e-15);
        assert!(matches!(tau_from_spectrum(&[0.0, 1.0]), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn tau_rmt_approaches_plugin_for_small_gamma() {
        let x = gaussian_data(5, 50_000, 1);
        let (a, b) = (tau_plugin(x.as_ref()).unwrap(), tau_rmt(x.as_ref()).unwrap());
        assert!(rel(b, a) < 1e-3);
    }

    #[test]
    fn tau_rejects_rank_deficient() {
        let mut x = gaussian_data(4, 20, 2);
        for j in 0..20 {
            x[(3, j)] = x[(2, j)];
        }
        assert!(matches!(tau_plugin(x.as_ref()), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn noise_vanishes_in_row_space() {
        let x = gaussian_data(20, 60, 3);
        let b: Vec<f64> = (0..20).map(|i| i as f64 * 0.1 - 1.0).collect();
        let y: Vec<f64> = (x.transpose() * faer::ColRef::from_slice(&b)).iter().copied().collect();
        assert!(noise_estimate_s(x.as_ref(), &y).unwrap() < 1e-20);
    }

    #[test]
    fn noise_matches_pure_noise_variance() {
        // Y independent of X: σ̃² = Var(Y) = 1, so S ≈ 1/d.
        let x = gaussian_data(100, 400, 4);
        let y: Vec<f64> = crate::model::gaussian_vec(400, 1.0, &mut rng(5));
        let s = noise_estimate_s(x.as_ref(), &y).unwrap();
        assert!(rel(s * 100.0, 1.0) < 0.2, "S·d = {}", s * 100.0);
    }

    #[test]
    fn quadform_invariant_under_response_scaling() {
        let (_, _, x, y) = instance(200, 0.5, 0.5, 6);
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let a = SampleStats::new(x.as_ref(), &y).unwrap();
        let b = SampleStats::new(x.as_ref(), &y2).unwrap();
        for theta in [0.3, 1.0, 3.0] {
            assert!(rel(a.quadform_estimate(theta).unwrap(), b.quadform_estimate(theta).unwrap()) < 1e-10);
            assert!(rel(a.h_rmt(theta).unwrap(), b.h_rmt(theta).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn quadform_derivative_is_minus_slope() {
        let (_, _, x, y) = instance(500, 0.5, 0.5, 7);
        let s = SampleStats::new(x.as_ref(), &y).unwrap();
        let h = 1e-4;
        for theta in [0.5, 1.0, 2.0] {
            let fd = -(s.quadform_estimate(theta + h).unwrap() - s.quadform_estimate(theta - h).unwrap()) / (2.0 * h);
            let exact = s.quadform_derivative_estimate(theta).unwrap();
            assert!(exact > 0.0);
            assert!(rel(fd, exact) < 1e-3, "theta {theta}: {fd} vs {exact}");
        }
    }

    #[test]
    fn stieltjes_estimate_positive_and_decreasing() {
        let x = gaussian_data(100, 300, 8);
        let s: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&t| stieltjes_estimate(x.as_ref(), t).unwrap()).collect();
        assert!(s.iter().all(|&v| v > 0.0));
        assert!(s.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn stieltjes_estimate_identity_population() {
        let x = gaussian_data(300, 1200, 9);
        let m = stieltjes_estimate(x.as_ref(), 1.0).unwrap();
        assert!((m - 0.5).abs() < 0.03, "{m}");
    }

    #[test]
    fn g1_identity_population() {
        let x = gaussian_data(200, 400, 10);
        let g = logdet_estimate_g1(x.as_ref(), 1.0, 5, &mut rng(11)).unwrap();
        assert!((g - 2f64.ln()).abs() < 0.05, "{g}");
        assert!(logdet_estimate_g1(x.as_ref(), 0.0, 1, &mut rng(11)).is_err());
    }

    fn random_spd(d: usize, seed: u64) -> Mat<f64> {
        let a = gaussian_data(d, 2 * d, seed);
        (&a * a.transpose()) * faer::Scale(1.0 / (2 * d) as f64)
    }

    #[test]
    fn logprob_pop_derivative_matches_difference() {
        let sigma = random_spd(50, 12);
        let b = crate::model::gaussian_vec(50, 1.0, &mut rng(13));
        let h = 1e-5;
        let (_, exact) = logprob_pop(sigma.as_ref(), &b, 1.0).unwrap();
        let fd = (logprob_pop(sigma.as_ref(), &b, 1.0 + h).unwrap().0 - logprob_pop(sigma.as_ref(), &b, 1.0 - h).unwrap().0)
            / (2.0 * h);
        assert!(rel(fd, exact) < 1e-6, "{fd} vs {exact}");
    }

    #[test]
    fn logprob_pop_identity_and_origin() {
        let eye = Mat::<f64>::identity(10, 10);
        let b = crate::model::gaussian_vec(10, 1.0, &mut rng(14));
        for theta in [0.0, 0.5, 3.0] {
            assert!(logprob_pop(eye.as_ref(), &b, theta).unwrap().1.abs() < 1e-15);
        }
        let sigma = random_spd(20, 15);
        let b = crate::model::gaussian_vec(20, 1.0, &mut rng(16));
        let pop = PopulationStats::new(sigma.as_ref(), &b).unwrap();
        let (l0, _) = pop.logprob(0.0).unwrap();
        let logdet = pop.profile().values().iter().map(|l| l.ln()).sum::<f64>() / 20.0;
        assert!((l0 - logdet).abs() < 1e-12);
        let zero = vec![0.0; 20];
        assert!(matches!(logprob_pop(sigma.as_ref(), &zero, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn logprob_plugin_derivative_matches_difference() {
        let (_, _, x, y) = instance(60, 0.5, 0.5, 17);
        let h = 1e-5;
        let (_, exact) = logprob_plugin(x.as_ref(), &y, 0.8).unwrap();
        let fd = (logprob_plugin(x.as_ref(), &y, 0.8 + h).unwrap().0 - logprob_plugin(x.as_ref(), &y, 0.8 - h).unwrap().0)
            / (2.0 * h);
        assert!(rel(fd, exact) < 1e-6, "{fd} vs {exact}");
    }

    #[test]
    fn solver_finds_planted_root() {
        // Σ with two eigenvalues and β̃ aligned so ∂L vanishes at a known θ.
        let values = vec![1.0, 1.0, 4.0, 4.0];
        let eig = SymmetricEigen { values: values.clone(), vectors: Mat::identity(4, 4) };
        // Weights w on {1, 4}: ∂L = 0 ⇔ m = Q₂/Q₁. Pick θ₀ = 1.5 and solve for w.
        let t0: f64 = 1.5;
        let m = 0.5 * (1.0 / (1.0 + t0) + 1.0 / (4.0 + t0));
        let (a1, a2) = (1.0 / (1.0 + t0), 4.0 / (4.0 + t0));
        let (b1, b2) = (1.0 / (1.0 + t0).powi(2), 4.0 / (4.0 + t0).powi(2));
        // w·(b1 − m a1) + (1−w)(b2 − m a2) = 0
        let w = (b2 - m * a2) / ((b2 - m * a2) - (b1 - m * a1));
        let beta = vec![w.sqrt(), 0.0, (1.0 - w).sqrt(), 0.0];
        let pop = PopulationStats::from_eigen(&eig, &beta).unwrap();
        let (theta, diag) = solve_theta(&ThetaObjective::new(ObjectiveKind::PopDerivative), ThetaInputs::Population(&pop)).unwrap();
        assert!(diag.root_found);
        assert!((theta - t0).abs() < 1e-7, "{theta}");
        assert!(diag.objective_residual <= 1e-12 || diag.bracket.1 - diag.bracket.0 <= 1e-6);
    }

    #[test]
    fn solver_reports_missing_root() {
        let eig = SymmetricEigen { values: vec![1.0, 4.0], vectors: Mat::identity(2, 2) };
        // All weight on the small eigenvalue pushes the root below zero.
        let pop = PopulationStats::from_eigen(&eig, &[1.0, 0.0]).unwrap();
        let (theta, diag) = solve_theta(&ThetaObjective::new(ObjectiveKind::PopDerivative), ThetaInputs::Population(&pop)).unwrap();
        assert_eq!(theta, 0.0);
        assert!(!diag.root_found);
    }

    #[test]
    fn solver_rejects_mismatched_inputs() {
        let eig = SymmetricEigen { values: vec![1.0, 4.0], vectors: Mat::identity(2, 2) };
        let pop = PopulationStats::from_eigen(&eig, &[1.0, 1.0]).unwrap();
        let obj = ThetaObjective::new(ObjectiveKind::RmtH);
        assert!(solve_theta(&obj, ThetaInputs::Population(&pop)).is_err());
        assert!(solve_theta(&obj.with_cap(-1.0), ThetaInputs::Population(&pop)).is_err());
    }

    #[test]
    fn degenerate_population_is_flagged() {
        let eig = SymmetricEigen { values: vec![1.0; 30], vectors: Mat::identity(30, 30) };
        let b = crate::model::gaussian_vec(30, 1.0, &mut rng(18));
        let pop = PopulationStats::from_eigen(&eig, &b).unwrap();
        let (_, _, x, y) = instance(30, 0.5, 0.5, 19);
        let est = estimate_all(x.as_ref(), &y, Some(&pop), &EstimatorConfig::default()).unwrap();
        assert!(est.get(Method::Population).unwrap().degenerate);
        assert!(!est.get(Method::Plugin).unwrap().degenerate);
    }

    #[test]
    fn estimates_are_consistent_records() {
        let (model, truth, x, y) = instance(150, 0.5, 0.5, 20);
        let pop = PopulationStats::from_model(&model, &truth).unwrap();
        let est = estimate_all(x.as_ref(), &y, Some(&pop), &EstimatorConfig::default()).unwrap();
        assert_eq!(est.estimates.len(), 4);
        for e in est.estimates.values() {
            assert!((0.0..1.0).contains(&e.zeta));
            assert!((e.zeta - zeta_from(e.tau, e.theta)).abs() < 1e-14);
            if !e.diagnostics.root_found {
                assert_eq!(e.theta, 0.0);
                assert_eq!(e.zeta, 0.0);
            }
        }
        let plg = est.get(Method::Plugin).unwrap();
        let tc = est.get(Method::TauCorrected).unwrap();
        assert_eq!(plg.theta, tc.theta);
        assert!((tc.tau - (1.0 - est.gamma) * plg.tau).abs() < 1e-14);
    }

    #[test]
    fn loglik_objective_runs_and_is_reproducible() {
        let (_, _, x, y) = instance(80, 0.5, 0.5, 21);
        let config = EstimatorConfig { rmt_objective: RmtObjective::LogLikelihood { draws: 1, seed: 3 }, ..Default::default() };
        let a = estimate_all(x.as_ref(), &y, None, &config).unwrap();
        let b = estimate_all(x.as_ref(), &y, None, &config).unwrap();
        assert_eq!(a.get(Method::Rmt).unwrap().theta, b.get(Method::Rmt).unwrap().theta);
    }

    #[test]
    fn sample_permutation_invariance() {
        let (_, _, x, y) = instance(100, 0.5, 0.5, 22);
        let n = x.ncols();
        let perm: Vec<usize> = (0..n).rev().collect();
        let xp = Mat::from_fn(x.nrows(), n, |i, j| x[(i, perm[j])]);
        let yp: Vec<f64> = perm.iter().map(|&j| y[j]).collect();
        let config = EstimatorConfig::default();
        let a = estimate_all(x.as_ref(), &y, None, &config).unwrap();
        let b = estimate_all(xp.as_ref(), &yp, None, &config).unwrap();
        let (za, zb) = (a.get(Method::Rmt).unwrap().zeta, b.get(Method::Rmt).unwrap().zeta);
        assert!((za - zb).abs() < 1e-9, "{za} vs {zb}");
    }

    #[test]
    fn shape_errors() {
        let x = gaussian_data(10, 8, 23);
        assert!(SampleStats::new(x.as_ref(), &[0.0; 8]).is_err());
        let x = gaussian_data(4, 8, 24);
        assert!(SampleStats::new(x.as_ref(), &[0.0; 7]).is_err());
    }

    proptest! {
        #[test]
        fn zeta_forms_agree(tau in 0.0f64..50.0, theta in 0.0f64..100.0) {
            prop_assert!((zeta_from(tau, theta) - zeta_complement(tau, theta)).abs() <= 1e-14);
        }

        #[test]
        fn zeta_monotone_link(tau in 0.01f64..20.0, theta in 0.01f64..20.0, bump in 1e-3f64..1.0) {
            let z = zeta_from(tau, theta);
            prop_assert!((0.0..1.0).contains(&z));
            prop_assert!(zeta_from(tau + bump, theta) > z);
            prop_assert!(zeta_from(tau, theta + bump) > z);
        }

        #[test]
        fn zero_theta_gives_zero_zeta(tau in 0.0f64..1e6) {
            prop_assert_eq!(zeta_from(tau, 0.0), 0.0);
            prop_assert_eq!(zeta_complement(tau, 0.0), 0.0);
        }

        #[test]
        fn profile_derivative_matches_difference(
            values in prop::collection::vec(0.1f64..10.0, 2..12),
            seed in 0u64..1000,
            theta in 0.05f64..5.0,
        ) {
            let coords = crate::model::gaussian_vec(values.len(), 1.0, &mut rng(seed));
            let p = ResolventProfile::new(values, &coords).unwrap();
            let h = 1e-5 * theta.max(1.0);
            let fd = (p.logprob(theta + h).unwrap().0 - p.logprob(theta - h).unwrap().0) / (2.0 * h);
            let exact = p.logprob(theta).unwrap().1;
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3));
        }
    }
}

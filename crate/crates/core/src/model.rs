//! Synthetic confounded causal models.
//!
//! The generative process is
//!
//! ```text
//! z ~ N(0, I_l),  ε ~ N(0, σ²),  x = M z,  y = xᵀβ + zᵀα + ε
//! ```
//!
//! with `M = U · diag(√λ) · V_dᵀ`, `λ` drawn from a Marchenko–Pastur law,
//! `U` Haar on O(d) and `V_d` a Haar l×d frame. Mechanism variances are
//! calibrated so that the concentrated confounding strength `τθ/(1+τθ)`
//! hits a requested target on every instance.

use faer::{ColRef, Mat, MatRef};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::spectral::{check_finite, gram, symmetric_eigen, GramSide, SymmetricEigen};

/// Support endpoints `c± = (1 ± √c)²`.
pub fn mp_support(c: f64) -> (f64, f64) {
    let s = c.sqrt();
    ((1.0 - s).powi(2), (1.0 + s).powi(2))
}

pub fn mp_density(c: f64, lambda: f64) -> f64 {
    let (lo, hi) = mp_support(c);
    let inner = (lambda - lo).max(0.0) * (hi - lambda).max(0.0);
    if inner <= 0.0 {
        return 0.0;
    }
    inner.sqrt() / (2.0 * std::f64::consts::PI * c * lambda)
}

fn check_ratio(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("Marchenko-Pastur ratio must lie in (0, 1), got {c}")))
    }
}

/// Rejection sampler under a flat envelope at the density maximum.
#[derive(Debug, Clone, Copy)]
pub struct MpSampler {
    c: f64,
    lo: f64,
    hi: f64,
    envelope: f64,
}

impl MpSampler {
    pub fn new(c: f64) -> Result<Self> {
        check_ratio(c)?;
        let (lo, hi) = mp_support(c);
        // The density is unimodal on its support: coarse grid, then golden section.
        let f = |l: f64| mp_density(c, l);
        let grid = 2000;
        let step = (hi - lo) / grid as f64;
        let best = (1..grid)
            .map(|i| lo + i as f64 * step)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap_or(0.5 * (lo + hi));
        let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let x1 = b - ratio * (b - a);
            let x2 = a + ratio * (b - a);
            if f(x1) < f(x2) {
                a = x1;
            } else {
                b = x2;
            }
        }
        let peak = f(0.5 * (a + b)).max(f(best));
        Ok(Self { c, lo, hi, envelope: peak * (1.0 + 1e-6) })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let lambda = rng.gen_range(self.lo..self.hi);
            let u = rng.gen_range(0.0..self.envelope);
            if u <= mp_density(self.c, lambda) {
                return lambda;
            }
        }
    }
}

pub fn sample_mp_eigenvalues<R: Rng + ?Sized>(d: usize, c: f64, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(invalid("need at least one eigenvalue"));
    }
    let sampler = MpSampler::new(c)?;
    Ok((0..d).map(|_| sampler.sample(rng)).collect())
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

pub(crate) fn gaussian_vec<R: Rng + ?Sized>(len: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        })
        .collect()
}

/// Haar-distributed `rows × cols` matrix with orthonormal columns.
///
/// QR of a Gaussian matrix, with the sign of each column fixed by the
/// diagonal of `R` so the distribution is exactly Haar on the Stiefel
/// manifold.
pub fn haar_semi_orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Mat<f64>> {
    if rows < cols {
        return Err(invalid(format!("need rows >= cols, got {rows} x {cols}")));
    }
    if cols == 0 {
        return Err(invalid("need at least one column"));
    }
    let g = gaussian_matrix(rows, cols, 1.0, rng);
    let qr = g.qr();
    let r = qr.thin_R();
    let mut q = qr.compute_thin_Q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            for i in 0..rows {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

#[derive(Debug, Clone)]
pub struct CausalModel {
    mixing: Mat<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    sigma_eps2: f64,
    sigma_alpha2: f64,
    sigma_beta2: f64,
    /// Eigendecomposition of Σ = MMᵀ.
    covariance_eigen: SymmetricEigen,
}

impl CausalModel {
    pub fn new(
        mixing: Mat<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        sigma_eps2: f64,
        sigma_alpha2: f64,
        sigma_beta2: f64,
    ) -> Result<Self> {
        check_finite(mixing.as_ref(), "mixing matrix")?;
        let sigma = gram(mixing.as_ref(), 1.0, GramSide::Covariance);
        let eig = symmetric_eigen(sigma.as_ref())?;
        Self::with_eigen(mixing, alpha, beta, sigma_eps2, sigma_alpha2, sigma_beta2, eig)
    }

    fn with_eigen(
        mixing: Mat<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        sigma_eps2: f64,
        sigma_alpha2: f64,
        sigma_beta2: f64,
        covariance_eigen: SymmetricEigen,
    ) -> Result<Self> {
        let (d, l) = (mixing.nrows(), mixing.ncols());
        if d == 0 || l < d {
            return Err(invalid(format!("mixing matrix must be d x l with l >= d >= 1, got {d} x {l}")));
        }
        if alpha.len() != l || beta.len() != d {
            return Err(invalid("alpha must have length l and beta length d"));
        }
        for (name, v) in [("sigma_eps2", sigma_eps2), ("sigma_alpha2", sigma_alpha2), ("sigma_beta2", sigma_beta2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if alpha.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(invalid("mechanism vectors must be finite"));
        }
        let smax = covariance_eigen.values.last().copied().unwrap_or(0.0).max(0.0).sqrt();
        let smin = covariance_eigen.values[0].max(0.0).sqrt();
        let tol = d.max(l) as f64 * f64::EPSILON * smax;
        if smin <= tol {
            return Err(Error::RankDeficient { min_eigenvalue: smin * smin, tolerance: tol * tol });
        }
        Ok(Self { mixing, alpha, beta, sigma_eps2, sigma_alpha2, sigma_beta2, covariance_eigen })
    }

    pub fn dim(&self) -> usize {
        self.mixing.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.mixing.ncols()
    }

    /// `γ̃ = l/d`
    pub fn gamma_tilde(&self) -> f64 {
        self.latent_dim() as f64 / self.dim() as f64
    }

    pub fn mixing(&self) -> MatRef<'_, f64> {
        self.mixing.as_ref()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sigma_eps2(&self) -> f64 {
        self.sigma_eps2
    }

    pub fn sigma_alpha2(&self) -> f64 {
        self.sigma_alpha2
    }

    pub fn sigma_beta2(&self) -> f64 {
        self.sigma_beta2
    }

    /// Eigenvalues of Σ = MMᵀ, ascending.
    pub fn covariance_eigenvalues(&self) -> &[f64] {
        &self.covariance_eigen.values
    }

    pub fn covariance_eigen(&self) -> &SymmetricEigen {
        &self.covariance_eigen
    }

    /// Σ = MMᵀ
    pub fn covariance(&self) -> Mat<f64> {
        let e = &self.covariance_eigen;
        let scaled = Mat::from_fn(e.vectors.nrows(), e.vectors.ncols(), |i, j| e.vectors[(i, j)] * e.values[j]);
        let s = &scaled * e.vectors.transpose();
        Mat::from_fn(s.nrows(), s.ncols(), |i, j| 0.5 * (s[(i, j)] + s[(j, i)]))
    }

    /// `Σ⁻¹ v` through the cached eigendecomposition.
    fn covariance_solve(&self, v: &[f64]) -> Vec<f64> {
        let e = &self.covariance_eigen;
        let c = e.vectors.transpose() * ColRef::from_slice(v);
        let scaled: Vec<f64> = c.iter().zip(&e.values).map(|(c, l)| c / l).collect();
        let out = e.vectors.as_ref() * ColRef::from_slice(&scaled);
        out.iter().copied().collect()
    }
}

/// How the confounder variance σ_α is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Confounding {
    /// Calibrated against the realized τ so that `τθ/(1+τθ)` hits the target.
    Zeta(f64),
    /// Fixed ratio `θ = σ_α/σ_β`.
    Theta(f64),
    /// `σ_α = (σ_β(1−ζ′) + ζ′τ)/(1−ζ′)`; the realized ζ generally misses `ζ′`.
    UncalibratedZeta(f64),
}

/// Knobs for [`build_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub d: usize,
    pub gamma_tilde: f64,
    pub c: f64,
    pub confounding: Confounding,
    pub sigma_beta2: f64,
    pub sigma_eps2: f64,
}

impl ModelSpec {
    pub fn new(d: usize, zeta_target: f64) -> Self {
        Self {
            d,
            gamma_tilde: 1.2,
            c: 1.0 / 3.0,
            confounding: Confounding::Zeta(zeta_target),
            sigma_beta2: 1.0,
            sigma_eps2: 1.0,
        }
    }

    pub fn with_theta(d: usize, theta: f64) -> Self {
        Self { confounding: Confounding::Theta(theta), ..Self::new(d, 0.0) }
    }

    pub fn latent_dim(&self) -> usize {
        (self.gamma_tilde * self.d as f64).round() as usize
    }
}

/// Confounder variance that makes `τθ/(1+τθ)` equal `zeta_target`.
pub fn calibrated_sigma_alpha2(zeta_target: f64, sigma_beta2: f64, tau: f64) -> f64 {
    zeta_target * sigma_beta2 / ((1.0 - zeta_target) * tau)
}

pub fn build_model<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<CausalModel> {
    let d = spec.d;
    let l = spec.latent_dim();
    if d == 0 {
        return Err(invalid("d must be positive"));
    }
    if !(spec.gamma_tilde >= 1.0) || l < d {
        return Err(invalid(format!("need l = round(gamma_tilde * d) >= d, got l = {l}, d = {d}")));
    }
    match spec.confounding {
        Confounding::Zeta(z) | Confounding::UncalibratedZeta(z) if !(0.0..1.0).contains(&z) => {
            return Err(invalid(format!("zeta target must lie in [0, 1), got {z}")));
        }
        Confounding::Theta(t) if !(t >= 0.0 && t.is_finite()) => {
            return Err(invalid(format!("theta must be finite and nonnegative, got {t}")));
        }
        _ => {}
    }
    if !(spec.sigma_beta2 > 0.0 && spec.sigma_beta2.is_finite()) {
        return Err(invalid("sigma_beta2 must be positive"));
    }
    if !(spec.sigma_eps2 >= 0.0 && spec.sigma_eps2.is_finite()) {
        return Err(invalid("sigma_eps2 must be nonnegative"));
    }

    let lambdas = sample_mp_eigenvalues(d, spec.c, rng)?;
    let u = haar_semi_orthogonal(d, d, rng)?;
    let v = haar_semi_orthogonal(l, d, rng)?;
    let u_scaled = Mat::from_fn(d, d, |i, j| u[(i, j)] * lambdas[j].sqrt());
    let mixing = &u_scaled * v.transpose();

    let tau = lambdas.iter().map(|l| 1.0 / l).sum::<f64>() / d as f64;
    let sigma_alpha2 = match spec.confounding {
        Confounding::Zeta(z) => calibrated_sigma_alpha2(z, spec.sigma_beta2, tau),
        Confounding::Theta(t) => t * spec.sigma_beta2,
        Confounding::UncalibratedZeta(z) => (spec.sigma_beta2 * (1.0 - z) + z * tau) / (1.0 - z),
    };
    let beta = gaussian_vec(d, spec.sigma_beta2.sqrt(), rng);
    let alpha = gaussian_vec(l, sigma_alpha2.sqrt(), rng);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
    let eigen = SymmetricEigen {
        values: order.iter().map(|&j| lambdas[j]).collect(),
        vectors: Mat::from_fn(d, d, |i, k| u[(i, order[k])]),
    };
    CausalModel::with_eigen(mixing, alpha, beta, spec.sigma_eps2, sigma_alpha2, spec.sigma_beta2, eigen)
}

/// Samples as columns of `x` (d×n) with responses `y` (n).
#[derive(Debug, Clone)]
pub struct ObservationalData {
    x: Mat<f64>,
    y: Vec<f64>,
}

impl ObservationalData {
    pub fn new(x: Mat<f64>, y: Vec<f64>) -> Result<Self> {
        if x.ncols() != y.len() {
            return Err(invalid(format!("X has {} columns but Y has {} entries", x.ncols(), y.len())));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(invalid("empty dataset"));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> MatRef<'_, f64> {
        self.x.as_ref()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn samples(&self) -> usize {
        self.x.ncols()
    }

    /// `γ = d/n`
    pub fn gamma(&self) -> f64 {
        self.dim() as f64 / self.samples() as f64
    }

    pub fn into_parts(self) -> (Mat<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}

pub fn draw_observations<R: Rng + ?Sized>(model: &CausalModel, n: usize, rng: &mut R) -> Result<ObservationalData> {
    let d = model.dim();
    if n <= d {
        return Err(invalid(format!("need n > d, got n = {n}, d = {d}")));
    }
    let z = gaussian_matrix(model.latent_dim(), n, 1.0, rng);
    let eps = gaussian_vec(n, model.sigma_eps2.sqrt(), rng);
    let x = model.mixing() * &z;
    let causal = x.transpose() * ColRef::from_slice(&model.beta);
    let confounded = z.transpose() * ColRef::from_slice(&model.alpha);
    let y = (0..n).map(|i| causal[i] + confounded[i] + eps[i]).collect();
    ObservationalData::new(x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// β̃ = β + M⁺ᵀα
    pub beta_stat: Vec<f64>,
    /// σ̃² = σ² + αᵀ(I − M⁺M)α
    pub sigma_stat2: f64,
    pub zeta: f64,
    /// τ = (1/d) Tr Σ⁻¹
    pub tau_pop: f64,
    /// θ* = σ_α/σ_β
    pub theta_true: f64,
}

/// `ζ = ‖δ‖²/(‖β‖² + ‖δ‖²)`, zero when both norms vanish.
pub fn confounding_strength(beta: &[f64], beta_stat: &[f64]) -> f64 {
    let b2: f64 = beta.iter().map(|v| v * v).sum();
    let e2: f64 = beta.iter().zip(beta_stat).map(|(b, s)| (s - b) * (s - b)).sum();
    if b2 + e2 == 0.0 {
        0.0
    } else {
        e2 / (b2 + e2)
    }
}

pub fn ground_truth(model: &CausalModel) -> Result<GroundTruth> {
    let d = model.dim();
    let m_alpha = model.mixing() * ColRef::from_slice(&model.alpha);
    let m_alpha: Vec<f64> = m_alpha.iter().copied().collect();
    // M⁺ᵀα = Σ⁻¹Mα and αᵀM⁺Mα = (Mα)ᵀΣ⁻¹(Mα) for full-row-rank M.
    let shift = model.covariance_solve(&m_alpha);
    let beta_stat: Vec<f64> = model.beta.iter().zip(&shift).map(|(b, s)| b + s).collect();
    let sigma_stat2 = if model.latent_dim() == d {
        model.sigma_eps2
    } else {
        let a2: f64 = model.alpha.iter().map(|v| v * v).sum();
        let proj: f64 = m_alpha.iter().zip(&shift).map(|(a, b)| a * b).sum();
        model.sigma_eps2 + (a2 - proj).max(0.0)
    };
    let values = model.covariance_eigenvalues();
    let tau_pop = values.iter().map(|l| 1.0 / l).sum::<f64>() / d as f64;
    let theta_true = match (model.sigma_alpha2, model.sigma_beta2) {
        (0.0, _) => 0.0,
        (_, 0.0) => f64::INFINITY,
        (a, b) => a / b,
    };
    Ok(GroundTruth {
        zeta: confounding_strength(&model.beta, &beta_stat),
        beta_stat,
        sigma_stat2,
        tau_pop,
        theta_true,
    })
}

/// `σ̃²/d − (γ̃ − 1)σ_α`, which vanishes as d grows.
pub fn statistical_noise_limit_check(model: &CausalModel) -> Result<f64> {
    let truth = ground_truth(model)?;
    Ok(truth.sigma_stat2 / model.dim() as f64 - (model.gamma_tilde() - 1.0) * model.sigma_alpha2)
}

/// A dataset generated directly in the eigenbasis of `Σ = diag(λ)`.
///
/// Since β and α are rotation invariant, `(X, Y, β̃)` has the law of the
/// full model up to a fixed rotation: `β̃ ~ N(0, σ_β(I + θΣ⁻¹))` and
/// `Y = Xᵀβ̃ + ε̃` with `ε̃ ~ N(0, σ̃²)` independent of `X`.
#[derive(Debug, Clone)]
pub struct ReducedInstance {
    pub lambdas: Vec<f64>,
    pub beta_stat: Vec<f64>,
    pub data: ObservationalData,
}

impl ReducedInstance {
    /// Eigendecomposition of `Σ = diag(λ)` with `λ` sorted ascending.
    pub fn covariance_eigen(&self) -> Result<SymmetricEigen> {
        let d = self.lambdas.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| self.lambdas[a].total_cmp(&self.lambdas[b]));
        Ok(SymmetricEigen {
            values: order.iter().map(|&i| self.lambdas[i]).collect(),
            vectors: Mat::from_fn(d, d, |i, k| if i == order[k] { 1.0 } else { 0.0 }),
        })
    }
}

fn check_reduced_args(lambdas: &[f64], theta: f64, sigma_beta2: f64) -> Result<()> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(invalid("eigenvalues must be positive and finite"));
    }
    if !(theta >= 0.0 && theta.is_finite()) || !(sigma_beta2 > 0.0 && sigma_beta2.is_finite()) {
        return Err(invalid("need finite theta >= 0 and sigma_beta2 > 0"));
    }
    Ok(())
}

pub fn draw_reduced_instance<R: Rng + ?Sized>(
    lambdas: &[f64],
    theta: f64,
    sigma_beta2: f64,
    sigma_stat2: f64,
    n: usize,
    rng: &mut R,
) -> Result<ReducedInstance> {
    check_reduced_args(lambdas, theta, sigma_beta2)?;
    if !(sigma_stat2 >= 0.0 && sigma_stat2.is_finite()) {
        return Err(invalid("sigma_stat2 must be finite and nonnegative"));
    }
    let d = lambdas.len();
    if n <= d {
        return Err(invalid(format!("need n > d, got n = {n}, d = {d}")));
    }
    let beta_stat: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let g: f64 = StandardNormal.sample(rng);
            g * (sigma_beta2 * (1.0 + theta / l)).sqrt()
        })
        .collect();
    let g = gaussian_matrix(d, n, 1.0, rng);
    let x = Mat::from_fn(d, n, |i, j| lambdas[i].sqrt() * g[(i, j)]);
    let noise = gaussian_vec(n, sigma_stat2.sqrt(), rng);
    let fitted = x.transpose() * ColRef::from_slice(&beta_stat);
    let y = fitted.iter().zip(&noise).map(|(f, e)| f + e).collect();
    let data = ObservationalData::new(x, y)?;
    Ok(ReducedInstance { lambdas: lambdas.to_vec(), beta_stat, data })
}

/// β̃ in the eigenbasis of `diag(λ)` with every coordinate at its expected
/// magnitude `√(σ_β(1 + θ/λ_i))` and a random sign. The population
/// log-likelihood derivative built from it vanishes exactly at `θ`.
pub fn typical_beta_stat<R: Rng + ?Sized>(lambdas: &[f64], theta: f64, sigma_beta2: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_reduced_args(lambdas, theta, sigma_beta2)?;
    Ok(lambdas
        .iter()
        .map(|&l| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            sign * (sigma_beta2 * (1.0 + theta / l)).sqrt()
        })
        .collect())
}

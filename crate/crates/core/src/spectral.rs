//! Eigenspectra of Gram matrices and Stieltjes-transform arithmetic.
//!
//! A [`Spectrum`] stores the nonzero part of an eigenvalue multiset together
//! with the ambient dimension the counting measure is normalized by. Missing
//! entries are implicit zeros, so the spectrum of the n×n kernel matrix
//! `XᵀX/n` can be built from the d eigenvalues of `XXᵀ/n` without an n×n
//! factorization.

use faer::{ColRef, Mat, MatRef, Side};

use crate::error::{invalid, Error, Result};

/// Numerical-rank cutoff `max(rows, cols) · ε · λ_max`.
pub fn rank_tolerance(rows: usize, cols: usize, lambda_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * lambda_max.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    size: usize,
}

impl Spectrum {
    /// Builds a spectrum from raw eigenvalues of a PSD matrix.
    ///
    /// Entries with `|λ| <= zero_tol` become exact zeros; anything more
    /// negative than `-zero_tol` is rejected.
    pub fn new(mut eigenvalues: Vec<f64>, size: usize, zero_tol: f64) -> Result<Self> {
        if size == 0 {
            return Err(invalid("spectrum size must be positive"));
        }
        if eigenvalues.len() > size {
            return Err(invalid(format!(
                "{} eigenvalues exceed spectrum size {size}",
                eigenvalues.len()
            )));
        }
        for v in eigenvalues.iter_mut() {
            if !v.is_finite() {
                return Err(invalid("non-finite eigenvalue"));
            }
            if *v < -zero_tol {
                return Err(invalid(format!("negative eigenvalue {v} in PSD spectrum")));
            }
            if v.abs() <= zero_tol {
                *v = 0.0;
            }
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self { eigenvalues, size })
    }

    /// Spectrum with every entry stored explicitly (`size = len`).
    pub fn from_values(eigenvalues: Vec<f64>) -> Result<Self> {
        let size = eigenvalues.len();
        Self::new(eigenvalues, size, 0.0)
    }

    /// Stored eigenvalues, ascending. Implicit zeros are not included.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of zero eigenvalues, implicit ones included.
    pub fn zero_count(&self) -> usize {
        self.size - self.eigenvalues.len() + self.eigenvalues.iter().filter(|&&v| v == 0.0).count()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0).max(0.0)
    }

    pub fn min(&self) -> f64 {
        if self.eigenvalues.len() < self.size {
            0.0
        } else {
            self.eigenvalues[0]
        }
    }

    /// The same nonzero eigenvalues re-normalized by a different ambient
    /// dimension, e.g. covariance → kernel spectrum.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        let nonzero: Vec<f64> = self.eigenvalues.iter().copied().filter(|&v| v != 0.0).collect();
        Self::new(nonzero, size, 0.0)
    }

    /// `(1/size) Σ g(λ)` over the full multiset, implicit zeros included.
    pub fn mean_of(&self, g: impl Fn(f64) -> f64) -> f64 {
        let implicit = (self.size - self.eigenvalues.len()) as f64;
        let explicit: f64 = self.eigenvalues.iter().map(|&l| g(l)).sum();
        let zero_part = if implicit > 0.0 { implicit * g(0.0) } else { 0.0 };
        (explicit + zero_part) / self.size as f64
    }

    fn contains(&self, point: f64) -> bool {
        (self.eigenvalues.len() < self.size && point == 0.0)
            || self.eigenvalues.binary_search_by(|v| v.total_cmp(&point)).is_ok()
    }

    pub fn stieltjes(&self, point: f64) -> Result<f64> {
        stieltjes(self, StieltjesQuery::first(point))
    }

    pub fn stieltjes_second(&self, point: f64) -> Result<f64> {
        stieltjes(self, StieltjesQuery::second(point))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformOrder {
    /// `m(z) = E[1/(λ − z)]`
    First,
    /// `M(z) = E[1/(λ − z)²]`, the derivative of `m` in `z`.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesQuery {
    pub point: f64,
    pub order: TransformOrder,
}

impl StieltjesQuery {
    pub fn first(point: f64) -> Self {
        Self { point, order: TransformOrder::First }
    }

    pub fn second(point: f64) -> Self {
        Self { point, order: TransformOrder::Second }
    }
}

pub fn stieltjes(spec: &Spectrum, q: StieltjesQuery) -> Result<f64> {
    if !q.point.is_finite() {
        return Err(invalid("Stieltjes point must be finite"));
    }
    if spec.contains(q.point) {
        return Err(Error::SingularPoint(q.point));
    }
    let z = q.point;
    Ok(match q.order {
        TransformOrder::First => spec.mean_of(|l| 1.0 / (l - z)),
        TransformOrder::Second => spec.mean_of(|l| {
            let r = 1.0 / (l - z);
            r * r
        }),
    })
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

fn symmetrized(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if a.nrows() != a.ncols() {
        return Err(invalid("matrix is not square"));
    }
    Ok(Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)])))
}

pub fn symmetric_eigen(a: MatRef<'_, f64>) -> Result<SymmetricEigen> {
    let sym = symmetrized(a)?;
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigensolver)?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok(SymmetricEigen { values, vectors: evd.U().to_owned() })
}

pub fn symmetric_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let sym = symmetrized(a)?;
    sym.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigensolver)
}

pub(crate) fn check_finite(x: MatRef<'_, f64>, what: &str) -> Result<()> {
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if !x[(i, j)].is_finite() {
                return Err(invalid(format!("{what} has a non-finite entry at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramSide {
    /// `scale · XXᵀ` (d×d)
    Covariance,
    /// `scale · XᵀX` (n×n)
    Kernel,
}

pub fn gram(x: MatRef<'_, f64>, scale: f64, side: GramSide) -> Mat<f64> {
    let g = match side {
        GramSide::Covariance => x * x.transpose(),
        GramSide::Kernel => x.transpose() * x,
    };
    g * faer::Scale(scale)
}

pub fn spectrum_of_gram(x: MatRef<'_, f64>, scale: f64, side: GramSide) -> Result<Spectrum> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(invalid("empty matrix"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("scale must be positive"));
    }
    check_finite(x.as_ref(), "X")?;
    let g = gram(x, scale, side);
    let values = symmetric_eigenvalues(g.as_ref())?;
    let lmax = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let tol = rank_tolerance(x.nrows(), x.ncols(), lmax);
    let size = g.nrows();
    Spectrum::new(values, size, tol)
}

/// Cached eigendecomposition of the sample covariance `XXᵀ/n`.
///
/// Every resolvent functional of the covariance is evaluated by rotating
/// into this eigenbasis once and then summing over eigenvalues.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    d: usize,
    n: usize,
    values: Vec<f64>,
    vectors: Mat<f64>,
    tolerance: f64,
}

impl CovarianceFactor {
    pub fn from_data(x: MatRef<'_, f64>) -> Result<Self> {
        let (d, n) = (x.nrows(), x.ncols());
        if d == 0 || n == 0 {
            return Err(invalid("empty data matrix"));
        }
        check_finite(x, "X")?;
        let cov = gram(x, 1.0 / n as f64, GramSide::Covariance);
        let eig = symmetric_eigen(cov.as_ref())?;
        Ok(Self::from_eigen(eig, d, n))
    }

    fn from_eigen(eig: SymmetricEigen, d: usize, n: usize) -> Self {
        let lmax = eig.values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let tolerance = rank_tolerance(d, n, lmax);
        let values = eig
            .values
            .into_iter()
            .map(|v| if v.abs() <= tolerance { 0.0 } else { v.max(0.0) })
            .collect();
        Self { d, n, values, vectors: eig.vectors, tolerance }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    /// Ascending eigenvalues, entries below the rank tolerance zeroed.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn rank(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum { eigenvalues: self.values.clone(), size: self.d }
    }

    /// Spectrum of `XᵀX/n`: the same nonzero eigenvalues plus `n − rank` zeros.
    pub fn kernel_spectrum(&self) -> Spectrum {
        let nonzero = self.values.iter().copied().filter(|&v| v > 0.0).collect();
        Spectrum { eigenvalues: nonzero, size: self.n }
    }

    /// Coordinates `Uᵀv` in the eigenbasis.
    pub fn rotate(&self, v: &[f64]) -> Vec<f64> {
        let c = self.vectors.transpose() * ColRef::from_slice(v);
        c.iter().copied().collect()
    }

    /// Inverse of [`rotate`](Self::rotate).
    pub fn unrotate(&self, coords: &[f64]) -> Vec<f64> {
        let v = self.vectors.as_ref() * ColRef::from_slice(coords);
        v.iter().copied().collect()
    }
}

/// Minimum-norm least-squares coefficients `((1/n)XXᵀ)⁺ (1/n)XY`.
pub fn min_norm_regress(x: MatRef<'_, f64>, y: &[f64]) -> Result<Vec<f64>> {
    if x.ncols() != y.len() {
        return Err(invalid(format!("X has {} columns but Y has {} entries", x.ncols(), y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("Y has a non-finite entry"));
    }
    let factor = CovarianceFactor::from_data(x)?;
    Ok(min_norm_with_factor(&factor, x, y))
}

pub(crate) fn min_norm_with_factor(factor: &CovarianceFactor, x: MatRef<'_, f64>, y: &[f64]) -> Vec<f64> {
    let n = x.ncols() as f64;
    let xy = x * ColRef::from_slice(y);
    let xy: Vec<f64> = xy.iter().map(|v| v / n).collect();
    let mut coords = factor.rotate(&xy);
    for (c, &l) in coords.iter_mut().zip(factor.values()) {
        *c = if l > 0.0 { *c / l } else { 0.0 };
    }
    factor.unrotate(&coords)
}

/// Solves `m̃(η) = 1/θ` for `η < 0` on the kernel spectrum.
///
/// `m̃` is strictly increasing and convex on ℝ⁻, so Newton iterates started
/// right of the root stay right of it; bisection takes over whenever a step
/// leaves the bracket.
pub fn solve_eta(kernel: &Spectrum, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    let target = 1.0 / theta;
    let residual = |eta: f64| kernel.mean_of(|l| 1.0 / (l - eta)) - target;
    let slope = |eta: f64| {
        kernel.mean_of(|l| {
            let r = 1.0 / (l - eta);
            r * r
        })
    };

    let mut lo = -theta * (kernel.max() + 1.0) * 10.0;
    let mut hi = -1e-12_f64;
    if residual(hi) <= 0.0 {
        if kernel.zero_count() == 0 {
            let sup = kernel.mean_of(|l| 1.0 / l);
            if target >= sup {
                return Err(Error::NoSolution(format!(
                    "1/theta = {target} exceeds sup of the kernel transform on R- ({sup})"
                )));
            }
        }
        while residual(hi) <= 0.0 {
            hi *= 1e-3;
            if hi > -f64::MIN_POSITIVE {
                return Err(Error::NoSolution(format!("cannot bracket 1/theta = {target}")));
            }
        }
    }
    let tol = 1e-10 * target;
    let mut eta = hi;
    for _ in 0..500 {
        let r = residual(eta);
        if r.abs() <= tol {
            return Ok(eta);
        }
        if r > 0.0 {
            hi = eta;
        } else {
            lo = eta;
        }
        let step = eta - r / slope(eta);
        eta = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs() {
            return Ok(eta);
        }
    }
    Err(Error::NoSolution(format!("eta iteration did not converge for theta = {theta}")))
}

/// `η′ = 1/(θ² m̃′(η))`, equal to `−dη/dθ`.
pub fn eta_derivative(kernel: &Spectrum, theta: f64, eta: f64) -> Result<f64> {
    let slope = kernel.stieltjes_second(eta)?;
    Ok(1.0 / (theta * theta * slope))
}

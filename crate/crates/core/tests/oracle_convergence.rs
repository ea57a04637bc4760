use confound_core::estimators::PopulationStats;
use confound_core::model::sample_mp_eigenvalues;
use confound_core::oracles::{f_plugin_limit, f_pop_limit, mixed_trace_limits, plugin_consistency_condition, LimitSpectrum};
use confound_core::roots::brent;
use confound_core::spectral::{symmetric_eigen, SymmetricEigen};
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn scan(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

fn sign_changes(f: impl Fn(f64) -> f64, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.windows(2).filter(|w| f(w[0]).signum() != f(w[1]).signum()).map(|w| (w[0], w[1])).collect()
}

fn root_of(f: impl Fn(f64) -> f64, (a, b): (f64, f64)) -> f64 {
    brent(|t| Ok(f(t)), a, b, f(a), f(b), 1e-15, 1e-13, 200).unwrap().root
}

#[test]
fn population_limit_vanishes_only_at_truth() {
    let nu = LimitSpectrum::marchenko_pastur(1.0 / 3.0).unwrap();
    for theta_star in [0.5, 1.0, 2.0] {
        let f = |t| f_pop_limit(t, theta_star, &nu);
        let changes = sign_changes(f, &scan(1e-3, 100.0, 200));
        assert_eq!(changes.len(), 1, "theta* = {theta_star}");
        assert!((root_of(f, changes[0]) - theta_star).abs() < 1e-6);
    }
}

#[test]
fn plugin_limit_is_biased_for_identity_covariance() {
    let mu = LimitSpectrum::marchenko_pastur(0.5).unwrap();
    let f = |t| f_plugin_limit(t, 1.0, 0.5, 1.2, &mu).unwrap();
    let changes = sign_changes(f, &scan(1e-3, 100.0, 200));
    assert!(!changes.is_empty());
    for c in changes {
        let root = root_of(f, c);
        assert!((root - 1.0).abs() > 0.05, "root {root}");
    }
    assert!(plugin_consistency_condition(1.0, 1.2, &mu).unwrap().abs() > 1e-3);
}

#[test]
fn plugin_limit_reduces_to_population_limit() {
    let nu = LimitSpectrum::marchenko_pastur(1.0 / 3.0).unwrap();
    let f = |t| f_plugin_limit(t, 1.0, 1e-8, 1.2, &nu).unwrap();
    let changes = sign_changes(f, &scan(1e-3, 100.0, 200));
    assert_eq!(changes.len(), 1);
    assert!((root_of(f, changes[0]) - 1.0).abs() < 1e-4);
}

#[test]
fn consistency_condition_nonzero_for_mp_chain() {
    // limiting sample spectrum of MP(1/3) population at γ = 1/2, from a large draw
    let d = 2000;
    let mut r = rng(1);
    let lambdas = sample_mp_eigenvalues(d, 1.0 / 3.0, &mut r).unwrap();
    let x = Mat::from_fn(d, 2 * d, |i, _| {
        let g: f64 = StandardNormal.sample(&mut r);
        lambdas[i].sqrt() * g
    });
    let cov = &x * x.transpose() * (1.0 / (2 * d) as f64);
    let mu = LimitSpectrum::empirical(symmetric_eigen(cov.as_ref()).unwrap().values).unwrap();
    assert!(plugin_consistency_condition(1.0, 1.2, &mu).unwrap().abs() > 1e-2);
}

#[test]
fn mixed_traces_match_identity_sample() {
    let (d, n, theta) = (2000, 4000, 1.0);
    let mut r = rng(2);
    let x = Mat::from_fn(d, n, |_, _| {
        let g: f64 = StandardNormal.sample(&mut r);
        g
    });
    let cov = &x * x.transpose() * (1.0 / n as f64);
    let values = symmetric_eigen(cov.as_ref()).unwrap().values;
    let first = values.iter().map(|l| l / (l + theta)).sum::<f64>() / d as f64;
    let second = values.iter().map(|l| l / (l + theta).powi(2)).sum::<f64>() / d as f64;
    let (a, b) = mixed_trace_limits(theta, 0.5, &LimitSpectrum::marchenko_pastur(0.5).unwrap());
    assert!((first - a).abs() < 0.02, "{first} vs {a}");
    assert!((second - b).abs() < 0.02, "{second} vs {b}");
}

fn population_gap(d: usize, seed: u64, nu: &LimitSpectrum) -> f64 {
    let theta_star = 1.0;
    let mut r = rng(seed);
    let lambdas = sample_mp_eigenvalues(d, 1.0 / 3.0, &mut r).unwrap();
    let beta: Vec<f64> = lambdas
        .iter()
        .map(|l| {
            let g: f64 = StandardNormal.sample(&mut r);
            (1.0 + theta_star / l).sqrt() * g
        })
        .collect();
    let pop = PopulationStats::from_eigen(&SymmetricEigen { vectors: Mat::identity(d, d), values: lambdas }, &beta).unwrap();
    [0.5, 2.0]
        .iter()
        .map(|&t| (pop.logprob(t).unwrap().1 - f_pop_limit(t, theta_star, nu)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn population_derivative_converges_to_limit() {
    let nu = LimitSpectrum::marchenko_pastur(1.0 / 3.0).unwrap();
    let median = |d: usize| {
        let mut v: Vec<f64> = (0..40).map(|s| population_gap(d, 100 + s, &nu)).collect();
        v.sort_by(f64::total_cmp);
        0.5 * (v[19] + v[20])
    };
    let (small, large) = (median(500), median(2000));
    assert!(large < small, "{large} vs {small}");
}

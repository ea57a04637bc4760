//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Positional arguments select criteria by
//! number, e.g. `cargo test -p confound-harness --test acceptance -- 3 4`.

use std::process::Command;
use std::time::Instant;

use confound_harness::grid::{rows_to_csv, run_replicate, GridRow, ReplicateOptions, COLUMNS};
use confound_core::estimators::{
    estimate_all, logdet_estimate_g1, solve_theta, EstimatorConfig, Method, ObjectiveKind, PopulationStats,
    ResolventProfile, SampleStats, ThetaInputs,
};
use confound_core::model::{
    build_model, draw_observations, draw_reduced_instance, ground_truth, sample_mp_eigenvalues, typical_beta_stat,
    ModelSpec, ReducedInstance,
};
use confound_core::oracles::{f_plugin_limit, f_pop_limit, LimitSpectrum};
use confound_core::roots::brent;
use confound_core::spectral::{gram, symmetric_eigenvalues, GramSide, SymmetricEigen};
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Noise variance of a γ̃ = 1.2 model with σ_β = σ_ε = 1.
fn sigma_stat2(d: usize, theta: f64) -> f64 {
    1.0 + theta * ((1.2 * d as f64).round() - d as f64)
}

fn reduced(lambdas: &[f64], theta: f64, n: usize, seed: u64) -> ReducedInstance {
    draw_reduced_instance(lambdas, theta, 1.0, sigma_stat2(lambdas.len(), theta), n, &mut rng(seed)).unwrap()
}

fn criterion_1() -> Outcome {
    let (mut plug, mut rmt) = (Vec::new(), Vec::new());
    for s in 0..10 {
        let inst = reduced(&vec![1.0; 500], 0.0, 1000, 100 + s);
        let stats = SampleStats::new(inst.data.x(), inst.data.y()).unwrap();
        plug.push(stats.tau_plugin());
        rmt.push(stats.tau_rmt());
    }
    let (p, r) = (median(plug), median(rmt));
    let ok = (1.90..=2.10).contains(&p) && (0.95..=1.05).contains(&r);
    (ok, format!("median tau_plugin {p:.4} in [1.90, 2.10], median tau_rmt {r:.4} in [0.95, 1.05]"))
}

fn criterion_2() -> Outcome {
    let d = 2000;
    let mut thetas = Vec::new();
    for s in 0..10 {
        let mut r = rng(200 + s);
        let mut lambdas = sample_mp_eigenvalues(d, 1.0 / 3.0, &mut r).unwrap();
        lambdas.sort_by(f64::total_cmp);
        let beta = typical_beta_stat(&lambdas, 2.0, 1.0, &mut r).unwrap();
        let eig = SymmetricEigen { vectors: Mat::identity(d, d), values: lambdas };
        let pop = PopulationStats::from_eigen(&eig, &beta).unwrap();
        let obj = EstimatorConfig::default().objective(ObjectiveKind::PopDerivative);
        thetas.push(solve_theta(&obj, ThetaInputs::Population(&pop)).unwrap().0);
    }
    let hits = thetas.iter().filter(|t| (*t / 2.0 - 1.0).abs() <= 0.1).count();
    let (lo, hi) = thetas.iter().fold((f64::INFINITY, 0f64), |(a, b), &t| (a.min(t), b.max(t)));
    (hits >= 9, format!("theta_pop within 10% of 2 in {hits}/10 replicates (range {lo:.4}..{hi:.4})"))
}

fn cell(d: usize, gamma: f64, seed0: u64) -> Vec<GridRow> {
    let spec = ModelSpec::with_theta(d, 1.0);
    let opts = ReplicateOptions::default();
    let rows: Vec<GridRow> = (0..25).map(|r| run_replicate(&spec, gamma, r, seed0 + r as u64, &opts)).collect();
    for r in &rows {
        assert!(!r.status.flag().starts_with("err"), "replicate {} failed: {}", r.replicate, r.status.flag());
    }
    rows
}

fn errors(rows: &[GridRow], m: Method) -> Vec<f64> {
    rows.iter().map(|r| r.zeta(m) - r.zeta_true).collect()
}

fn mae(rows: &[GridRow], m: Method) -> f64 {
    mean(&errors(rows, m).iter().map(|e| e.abs()).collect::<Vec<_>>())
}

fn criterion_3(rows: &[GridRow]) -> Outcome {
    let dev: Vec<f64> = rows.iter().map(|r| r.theta_plugin - r.theta_true).collect();
    let t = mean(&dev) / (sd(&dev) / (dev.len() as f64).sqrt());
    let (bp, bt) = (mean(&errors(rows, Method::Plugin)), mean(&errors(rows, Method::TauCorrected)));
    let ok = t.abs() > 3.0 && bp > 0.0 && bt < 0.0;
    (ok, format!("t(theta_plugin - theta*) = {t:.2} (|t| > 3), bias zeta_plugin {bp:+.4} (> 0), bias zeta_tcorr {bt:+.4} (< 0)"))
}

fn criterion_4(rows: &[GridRow]) -> Outcome {
    let (rmt, plg, tc) = (mae(rows, Method::Rmt), mae(rows, Method::Plugin), mae(rows, Method::TauCorrected));
    let small = mae(&cell(250, 0.5, 4000), Method::Rmt);
    let large = mae(&cell(1000, 0.5, 5000), Method::Rmt);
    let ok = rmt < 0.10 && rmt < plg && rmt < tc && large < small;
    (
        ok,
        format!(
            "gamma 0.9: MAE rmt {rmt:.4} (< 0.10), plugin {plg:.4}, tcorr {tc:.4}, population {:.4}; \
gamma 0.5: MAE rmt d=250 {small:.4} > d=1000 {large:.4}",
            mae(rows, Method::Population)
        ),
    )
}

fn criterion_5() -> Outcome {
    let spec = ModelSpec::with_theta(1000, 1.0);
    let (mut stat, mut lim) = (Vec::new(), Vec::new());
    for s in 0..10 {
        let mut r = rng(600 + s);
        let model = build_model(&spec, &mut r).unwrap();
        let truth = ground_truth(&model).unwrap();
        let data = draw_observations(&model, 2000, &mut r).unwrap();
        let noise = SampleStats::new(data.x(), data.y()).unwrap().noise();
        stat.push(noise / (truth.sigma_stat2 / 1000.0));
        lim.push(noise / ((spec.gamma_tilde - 1.0) * model.sigma_alpha2()));
    }
    let (a, b) = (median(stat), median(lim));
    let ok = (a - 1.0).abs() <= 0.10 && (b - 1.0).abs() <= 0.15;
    (ok, format!("median S/(sigma_stat^2/d) {a:.4} (within 10%), median S/((gt-1)sigma_alpha) {b:.4} (within 15%)"))
}

fn criterion_6() -> Outcome {
    let spec = ModelSpec::with_theta(1000, 1.0);
    let mut r = rng(700);
    let model = build_model(&spec, &mut r).unwrap();
    let truth = ground_truth(&model).unwrap();
    let data = draw_observations(&model, 2000, &mut r).unwrap();
    let stats = SampleStats::new(data.x(), data.y()).unwrap();
    let pop = PopulationStats::from_model(&model, &truth).unwrap();
    let lambdas = model.covariance_eigenvalues();
    let mut worst: (f64, String) = (0.0, String::new());
    for theta in [0.5, 1.0, 2.0] {
        let logdet = lambdas.iter().map(|l| (l + theta).ln()).sum::<f64>() / lambdas.len() as f64;
        let g1 = logdet_estimate_g1(data.x(), theta, 5, &mut rng(701)).unwrap();
        let pairs = [
            ("stieltjes", stats.stieltjes_estimate(theta).unwrap(), pop.profile().stieltjes(theta)),
            ("quadform", stats.quadform_estimate(theta).unwrap(), pop.profile().quadform(theta, 1).unwrap()),
            ("quadform'", stats.quadform_derivative_estimate(theta).unwrap(), pop.profile().quadform(theta, 2).unwrap()),
            ("logdet", g1, logdet),
        ];
        for (name, est, target) in pairs {
            let gap = (est - target).abs();
            if gap >= worst.0 {
                worst = (gap, format!("{name} at theta {theta}"));
            }
        }
    }
    (worst.0 < 0.05, format!("largest gap {:.4} ({}) over 12 estimates (< 0.05)", worst.0, worst.1))
}

fn criterion_7() -> Outcome {
    let (d, n, theta_star, gamma) = (4000, 8000, 1.0, 0.5);
    let thetas = [0.5, 1.0, 2.0];
    let nu = LimitSpectrum::marchenko_pastur(1.0 / 3.0).unwrap();

    // μ from an independent large draw
    let mu = {
        let mut r = rng(800);
        let lambdas = sample_mp_eigenvalues(d, 1.0 / 3.0, &mut r).unwrap();
        let inst = draw_reduced_instance(&lambdas, 0.0, 1.0, 1.0, n, &mut r).unwrap();
        let cov = gram(inst.data.x(), 1.0 / n as f64, GramSide::Covariance);
        LimitSpectrum::empirical(symmetric_eigenvalues(cov.as_ref()).unwrap()).unwrap()
    };

    let lambdas = sample_mp_eigenvalues(d, 1.0 / 3.0, &mut rng(801)).unwrap();
    let inst = reduced(&lambdas, theta_star, n, 802);
    let profile = ResolventProfile::new(lambdas, &inst.beta_stat).unwrap();
    let stats = SampleStats::new(inst.data.x(), inst.data.y()).unwrap();
    let (mut pop_gap, mut plg_gap) = (0f64, 0f64);
    for t in thetas {
        pop_gap = pop_gap.max((profile.logprob(t).unwrap().1 - f_pop_limit(t, theta_star, &nu)).abs());
        let lim = f_plugin_limit(t, theta_star, gamma, 1.2, &mu).unwrap();
        plg_gap = plg_gap.max((stats.logprob_plugin(t).unwrap().1 - lim).abs());
    }
    let f = |t: f64| Ok(f_pop_limit(t, theta_star, &nu));
    let root = brent(f, 0.1, 10.0, f(0.1).unwrap(), f(10.0).unwrap(), 1e-15, 1e-13, 200).unwrap().root;
    let ok = pop_gap < 0.05 && plg_gap < 0.05 && (root - theta_star).abs() < 1e-6;
    (ok, format!("max gap pop {pop_gap:.4}, plugin {plg_gap:.4} (< 0.05); f_pop_limit root {root:.10} (theta* = 1 to 1e-6)"))
}

fn criterion_8() -> Outcome {
    let (d, n) = (200, 400);
    let inst = reduced(&vec![1.0; d], 1.0, n, 900);
    let eig = SymmetricEigen { vectors: Mat::identity(d, d), values: vec![1.0; d] };
    let pop = PopulationStats::from_eigen(&eig, &inst.beta_stat).unwrap();
    let config = EstimatorConfig::default();
    let est = estimate_all(inst.data.x(), inst.data.y(), Some(&pop), &config).unwrap();
    let flagged = est.get(Method::Population).unwrap().degenerate;
    let grid = config.objective(ObjectiveKind::PopDerivative).grid();
    let worst = grid.iter().map(|&t| pop.logprob(t).unwrap().1.abs()).fold(0.0, f64::max);
    (flagged && worst < 1e-8, format!("population degeneracy flag {flagged}, max |dL/dtheta| {worst:.2e} over {} scan points", grid.len()))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    std::fs::write(&cfg, "d_values = 100\ngamma_values = 0.5\nreplicates = 2\nmaster_seed = 7\n").unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_confound"))
            .args(["grid", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let (a, b, c) = (run("a.csv", "1"), run("b.csv", "1"), run("c.csv", "3"));
    let text = String::from_utf8(a.clone()).unwrap();
    let mut lines = text.lines();
    let header_ok = lines.next() == Some(COLUMNS.join(",").as_str()) && rows_to_csv(&[]).trim_end() == COLUMNS.join(",");
    let rows: Vec<&str> = lines.collect();
    let widths_ok = rows.len() == 2 && rows.iter().all(|l| l.split(',').count() == COLUMNS.len());
    let ok = a == b && a == c && header_ok && widths_ok;
    (ok, format!("repeat runs identical {}, thread counts identical {}, header exact {header_ok}, {} rows x {} columns", a == b, a == c, rows.len(), COLUMNS.len()))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |k: usize| selected.is_empty() || selected.contains(&k);
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut record = |k: usize, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {k}: {} ({secs:.1}s) {}", if outcome.0 { "PASS" } else { "FAIL" }, outcome.1);
        results.push((k, outcome, secs));
    };
    let simple: [(usize, fn() -> Outcome); 4] = [(1, criterion_1), (2, criterion_2), (5, criterion_5), (6, criterion_6)];
    for (k, f) in &simple[..2] {
        if want(*k) {
            record(*k, f);
        }
    }
    if want(3) || want(4) {
        let rows = cell(1000, 0.9, 3000);
        if want(3) {
            record(3, &|| criterion_3(&rows));
        }
        if want(4) {
            record(4, &|| criterion_4(&rows));
        }
    }
    for (k, f) in &simple[2..] {
        if want(*k) {
            record(*k, f);
        }
    }
    for (k, f) in [(7, criterion_7 as fn() -> Outcome), (8, criterion_8), (9, criterion_9)] {
        if want(k) {
            record(k, &f);
        }
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.1 .0).map(|r| r.0).collect();
    let total: f64 = results.iter().map(|r| r.2).sum();
    println!("{} criteria run in {total:.0}s, failed: {failed:?}", results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

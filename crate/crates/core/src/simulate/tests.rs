use std::sync::Arc;

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use super::*;
use crate::model::CirDiffusion;

fn cfg(paths: usize, horizon: f64, step: f64) -> SimConfig {
    SimConfig { paths, horizon, step, seed: 17, ..SimConfig::default() }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn case2() -> (CoefficientSet, LevyMeasure) {
    (CoefficientSet::csbp(0.0, 1.0, 0.0, 1.0).unwrap(), LevyMeasure::stable_truncated(1.5, 1.0).unwrap())
}

#[test]
fn deterministic_decay_matches_ode() {
    let c = CoefficientSet::csbp(0.0, 1.0, 0.0, 0.0).unwrap();
    let h = 1e-3;
    let e = simulate_single(&c, &LevyMeasure::zero(), 1.0, &cfg(3, 1.0, h)).unwrap();
    let xt = e.at(1.0).unwrap();
    for v in xt {
        assert!((v - (-1f64).exp()).abs() < h, "{v}");
    }
}

#[test]
fn cir_mean_follows_mean_ode() {
    let c = CoefficientSet::cir(1.0, 0.5, 1.0, CirDiffusion::Literal).unwrap();
    let conf = SimConfig { checkpoints: vec![0.5, 1.0], ..cfg(20_000, 1.0, 1e-3) };
    let e = simulate_single(&c, &LevyMeasure::zero(), 2.0, &conf).unwrap();
    for t in [0.5f64, 1.0] {
        let (m, se) = mean_se(&e.at(t).unwrap());
        let want = 2.0 * (-t).exp() + 1.0 - (-t).exp();
        assert!((m - want).abs() < 3.0 * se, "t = {t}: {m} vs {want} (se {se})");
    }
}

#[test]
fn origin_is_absorbing() {
    let (c, nu) = case2();
    let e = simulate_single(&c, &nu, 0.0, &cfg(50, 1.0, 1e-2)).unwrap();
    assert!(e.paths.iter().all(|p| p.x.iter().all(|&v| v == 0.0)));
}

#[test]
fn equal_starts_are_coalesced() {
    let (c, nu) = case2();
    let e = simulate_coupled(&c, &nu, 0.7, 0.7, &cfg(20, 1.0, 1e-2)).unwrap();
    for p in &e.paths {
        assert_eq!(p.coalescence, 0.0);
        assert_eq!(p.x, p.y);
    }
}

#[test]
fn synchronous_cir_difference_mean() {
    let c = CoefficientSet::cir(1.0, 0.5, 1.0, CirDiffusion::Literal).unwrap();
    let conf = SimConfig { kind: CouplingKind::Synchronous, checkpoints: vec![1.0], ..cfg(20_000, 1.0, 1e-3) };
    let e = simulate_coupled(&c, &LevyMeasure::zero(), 2.0, 1.0, &conf).unwrap();
    let k = e.time_index(1.0).unwrap();
    let u: Vec<f64> = e.paths.iter().map(|p| p.x[k] - p.y[k]).collect();
    let (m, se) = mean_se(&u);
    assert!((m - (-1f64).exp()).abs() < 3.0 * se.max(1e-4), "{m} (se {se})");
}

#[test]
fn refined_coupling_coalesces_progressively() {
    let (c, nu) = case2();
    let ts = [0.5, 1.0, 2.0, 4.0];
    let conf = SimConfig { kappa: 0.5, checkpoints: ts.to_vec(), ..cfg(4000, 4.0, 1e-3) };
    let e = simulate_coupled(&c, &nu, 1.0, 0.5, &conf).unwrap();
    assert!(e.failed.is_empty());
    assert_eq!(e.total_violations(), 0);
    assert_eq!(e.max_gap_after_coalescence(), 0.0);
    let n = e.paths.len() as f64;
    let mut last_frac = -1.0;
    let mut last_gap = f64::INFINITY;
    for t in ts {
        let k = e.time_index(t).unwrap();
        let frac = e.paths.iter().filter(|p| p.coalescence <= t).count() as f64 / n;
        let gap = e.paths.iter().map(|p| (p.x[k] - p.y[k]).abs()).sum::<f64>() / n;
        assert!(frac > last_frac, "t = {t}: {frac}");
        assert!(gap < last_gap, "t = {t}: {gap}");
        last_frac = frac;
        last_gap = gap;
    }
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let (c, nu) = case2();
    let base = SimConfig { kappa: 0.5, checkpoints: vec![0.5, 1.0], ..cfg(64, 1.0, 1e-2) };
    let one = simulate_coupled(&c, &nu, 1.0, 0.5, &SimConfig { threads: Some(1), ..base.clone() }).unwrap();
    let four = simulate_coupled(&c, &nu, 1.0, 0.5, &SimConfig { threads: Some(4), ..base }).unwrap();
    assert_eq!(one.paths, four.paths);
}

#[test]
fn jump_counts_are_poisson() {
    // γ₂ ≡ 2 while X ≥ 1; jumps are positive and the compensator cannot
    // pull X from 10 below 1 within unit time
    let c = CoefficientSet::new(
        "flat-rate",
        Arc::new(|_| 0.0),
        Arc::new(|_| 0.0),
        Arc::new(|x: f64| 2.0 * x.clamp(0.0, 1.0)),
    )
    .unwrap();
    let nu = LevyMeasure::stable_truncated(1.5, 1.0).unwrap();
    let conf = SimConfig { eps: 0.1, checkpoints: vec![1.0], ..cfg(100_000, 1.0, 1e-2) };
    let e = simulate_single(&c, &nu, 10.0, &conf).unwrap();
    let lambda = 2.0 * (0.1f64.powf(-1.5) - 1.0) / 1.5;
    let pois = Poisson::new(lambda).unwrap();
    let mut counts = std::collections::BTreeMap::new();
    for p in &e.paths {
        *counts.entry(p.jumps).or_insert(0usize) += 1;
    }
    let n = e.paths.len() as f64;
    // bins with expected count >= 5, tails lumped
    let (mut lo, mut hi) = (0u64, 200u64);
    while pois.pmf(lo) * n < 5.0 {
        lo += 1;
    }
    while pois.pmf(hi) * n < 5.0 {
        hi -= 1;
    }
    let mut chi2 = 0.0;
    let mut bins = 0;
    let obs = |k: u64| *counts.get(&k).unwrap_or(&0) as f64;
    let low_obs: f64 = counts.range(..=lo).map(|(_, &v)| v as f64).sum();
    let high_obs: f64 = counts.range(hi..).map(|(_, &v)| v as f64).sum();
    let low_exp = pois.cdf(lo) * n;
    let high_exp = (1.0 - pois.cdf(hi - 1)) * n;
    for (o, x) in [(low_obs, low_exp), (high_obs, high_exp)] {
        chi2 += (o - x).powi(2) / x;
        bins += 1;
    }
    for k in lo + 1..hi {
        let x = pois.pmf(k) * n;
        chi2 += (obs(k) - x).powi(2) / x;
        bins += 1;
    }
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 1e-3, "chi2 = {chi2} over {bins} bins, p = {p}");
}

#[test]
fn binary_round_trip() {
    let (c, nu) = case2();
    let conf = SimConfig { kappa: 0.5, checkpoints: vec![0.0, 0.5, 1.0], ..cfg(10, 1.0, 1e-2) };
    let e = simulate_coupled(&c, &nu, 1.0, 0.5, &conf).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.bin");
    write_ensemble_binary(&path, &e).unwrap();
    let back = read_ensemble_binary(&path).unwrap();
    assert_eq!(back.config, e.config);
    assert_eq!(back.times, e.times);
    assert_eq!((back.x0, back.y0), (1.0, 0.5));
    for (a, b) in back.paths.iter().zip(&e.paths) {
        assert_eq!((a.id, a.seed, a.coalescence), (b.id, b.seed, b.coalescence));
        assert_eq!((&a.x, &a.y), (&b.x, &b.y));
    }
    let bytes = std::fs::read(&path).unwrap();
    write_ensemble_binary(&path, &e).unwrap();
    assert_eq!(bytes, std::fs::read(&path).unwrap());
    write_ensemble_csv(&dir.path().join("ens.csv"), &e).unwrap();
}

#[test]
fn ks_statistic_edges() {
    assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
    assert_eq!(ks_two_sample(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
    assert!(ks_two_sample(&[], &[1.0]).is_err());
}

#[test]
fn pure_diffusion_marginals_agree() {
    let c = CoefficientSet::cir(1.0, 0.5, 1.0, CirDiffusion::Literal).unwrap();
    let conf = SimConfig { checkpoints: vec![0.5, 1.0], ..cfg(20_000, 1.0, 1e-3) };
    let r = marginal_consistency(&c, &LevyMeasure::zero(), 2.0, &conf).unwrap();
    assert!(r.passes(0.03), "{r}");
}

#[test]
fn exploding_paths_are_reported() {
    let c = CoefficientSet::new("cubic", Arc::new(|x: f64| x * x * x), Arc::new(|_| 0.0), Arc::new(|_| 0.0)).unwrap();
    let e = simulate_single(&c, &LevyMeasure::zero(), 10.0, &cfg(4, 5.0, 0.1)).unwrap();
    assert!(e.paths.is_empty());
    assert_eq!(e.failed.len(), 4);
}

#[test]
fn checkpoints_must_sit_on_the_grid() {
    let (c, nu) = case2();
    let conf = SimConfig { checkpoints: vec![0.123_45], ..cfg(2, 1.0, 1e-2) };
    assert!(simulate_single(&c, &nu, 1.0, &conf).is_err());
    assert!(SimConfig { step: 0.0, ..SimConfig::default() }.validate().is_err());
}

#[test]
fn jump_mean_is_step_independent() {
    // E X_t = e^{-t}: the compensated jump part is a martingale for any step
    let (c, nu) = case2();
    for h in [1e-3, 1e-2, 2.5e-2] {
        let conf = SimConfig { checkpoints: vec![1.0], ..cfg(20_000, 1.0, h) };
        let e = simulate_single(&c, &nu, 1.0, &conf).unwrap();
        let (m, se) = mean_se(&e.at(1.0).unwrap());
        let want = (-1f64).exp();
        assert!((m - want).abs() < 3.0 * se + 2.0 * h, "h = {h}: {m} vs {want} (se {se})");
    }
}

#[test]
fn coupled_gap_mean_is_step_independent() {
    // with linear coefficients E(X_t - Y_t) = (x0 - y0) e^{-t} while the pair stays ordered
    let (c, nu) = case2();
    for h in [1e-3, 2.5e-2] {
        let conf = SimConfig { checkpoints: vec![1.0], kappa: 0.5, ..cfg(10_000, 1.0, h) };
        let e = simulate_coupled(&c, &nu, 1.0, 0.5, &conf).unwrap();
        let u: Vec<f64> = e.x_at(1.0).unwrap().iter().zip(e.y_at(1.0).unwrap()).map(|(x, y)| x - y).collect();
        let (m, se) = mean_se(&u);
        let want = 0.5 * (-1f64).exp();
        assert!((m - want).abs() < 3.0 * se + h, "h = {h}: {m} vs {want} (se {se})");
    }
}

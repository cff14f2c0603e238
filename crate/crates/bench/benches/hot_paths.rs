use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nlbranch::generator::apply_coupling_l;
use nlbranch::simulate::{simulate_coupled, SimConfig};
use nlbranch::testfn::{derive_constants, DriftModulus, JumpRoute, Phi1, TestFn, TheoremCase};
use nlbranch::{CoefficientSet, LevyMeasure, QuadratureSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn case2() -> (CoefficientSet, LevyMeasure) {
    (CoefficientSet::csbp(0.0, 1.0, 0.0, 1.0).unwrap(), LevyMeasure::stable_truncated(1.5, 1.0).unwrap())
}

fn constants(phi1: Phi1) -> nlbranch::testfn::ContractionConstants {
    let case = TheoremCase::A2 { alpha: 1.5, beta: 1.0, c_star: 2.0, k3: 1.0, kappa: 0.5, route: JumpRoute::Overlap };
    derive_constants(case, &DriftModulus::new(phi1, None, 1.0, Some(1.0)).unwrap()).unwrap()
}

fn psi_eval(c: &mut Criterion) {
    let flat = constants(Phi1::Zero).psi;
    let logmod = constants(Phi1::LogOnePlus { b: 0.05 }).psi;
    let rs: Vec<f64> = (1..=64).map(|k| 0.05 * k as f64).collect();
    c.bench_function("psi/closed-form g, 64 points", |b| {
        b.iter(|| rs.iter().map(|&r| flat.value(r) + flat.d2(r)).sum::<f64>())
    });
    c.bench_function("psi/cached g, 64 points", |b| {
        b.iter(|| rs.iter().map(|&r| logmod.value(r) + logmod.d2(r)).sum::<f64>())
    });
}

fn coupling_operator(c: &mut Criterion) {
    let (coeffs, nu) = case2();
    let psi = constants(Phi1::Zero).psi;
    let q = QuadratureSpec::default();
    c.bench_function("coupling operator/refined at (2, 0.5)", |b| {
        b.iter(|| apply_coupling_l(&psi, black_box(2.0), black_box(0.5), &coeffs, &nu, 0.5, &q).unwrap())
    });
}

fn jump_sampling(c: &mut Criterion) {
    let nu = LevyMeasure::stable_truncated(1.5, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("sampler/stable jump above 0.01", |b| b.iter(|| nu.sample_jump_above(0.01, &mut rng).unwrap()));
}

fn coupled_paths(c: &mut Criterion) {
    let (coeffs, nu) = case2();
    let cfg = SimConfig {
        paths: 200,
        horizon: 1.0,
        step: 1e-2,
        kappa: 0.5,
        checkpoints: vec![0.5, 1.0],
        threads: Some(1),
        ..SimConfig::default()
    };
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("refined pairs, 200 paths to t = 1", |b| {
        b.iter(|| simulate_coupled(&coeffs, &nu, 1.0, 0.5, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, psi_eval, coupling_operator, jump_sampling, coupled_paths);
criterion_main!(benches);

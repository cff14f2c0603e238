//! End-to-end acceptance runs. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nlbranch::estimate::DecayCurve;
use nlbranch::generator::{
    cir_expected_hitting_time, invariant_density_residual, invariant_mass_lower_bound, invariant_measure_mass,
    verify_lyapunov, LyapunovSpec,
};
use nlbranch::scenario::{self, Config, ModelSpec, Overrides, Scenario, StrongBranch};
use nlbranch::simulate::{marginal_consistency_from, SimConfig};
use nlbranch::testfn::{
    build_g, build_psi, log_grid, ClosureFn, DriftModulus, Phi1, TestFn,
};
use nlbranch::{LevyMeasure, Mass, QuadratureSpec};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn preset(name: &str, paths: Option<usize>) -> Scenario {
    let mut s = Scenario::preset(name).expect("preset exists");
    s.apply(&Overrides { paths, ..Default::default() }).expect("valid override");
    s
}

fn couple(name: &str, paths: Option<usize>) -> DecayCurve {
    scenario::run_couple(&preset(name, paths)).expect("coupled run").1
}

/// CIR with synchronous coupling: the gap is deterministic, `e^{-t}`.
fn cir_rate() -> Outcome {
    let curve = couple("cir", Some(100_000));
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, &t) in curve.t.iter().enumerate() {
        let want = (-t).exp();
        let z = (curve.w1[k] - want).abs() / curve.w1_se[k].max(f64::MIN_POSITIVE);
        ok &= z <= 3.0 || curve.w1[k] == want;
        detail.push(format!("w1({t}) = {:.5} vs {want:.5} ({z:.2} se)", curve.w1[k]));
    }
    match &curve.w1_fit {
        Some(f) => {
            ok &= (0.9..=1.1).contains(&f.lambda);
            detail.push(format!("fit lambda = {:.4}", f.lambda));
            // the certified rate can only undershoot the true one
            if let Some(k) = scenario::run_check(&preset("cir", None)).constants {
                ok &= k.lambda <= f.lambda + 3.0 * f.lambda_se;
                detail.push(format!("certified lambda = {:e}", k.lambda));
            }
        }
        None => {
            ok = false;
            detail.push("no rate fit".into());
        }
    }
    outcome(ok, detail.join(", "))
}

fn lyapunov_grid() -> Outcome {
    let s = preset("case2-basic", None);
    let outcome_ = scenario::run_check(&s);
    let Some(k) = outcome_.constants.as_ref() else {
        return outcome(false, format!("no constants: {:?}", outcome_.errors));
    };
    let pairs = nlbranch::generator::pair_grid(1e-3, 10.0, 200, &s.spec.grid.ys);
    let r = verify_lyapunov(&k.psi, &LyapunovSpec::from_constants(k), &s.coeffs, &s.nu, &pairs, &QuadratureSpec::default());
    let worst = r.param("max_margin").unwrap_or(f64::INFINITY);
    outcome(
        k.lambda > 0.0 && r.holds() && worst <= 1e-6,
        format!("lambda = {:e}, {} pairs, max(L psi + lambda psi) = {worst:e}", k.lambda, pairs.len()),
    )
}

/// Five-point central difference.
fn diff(f: &dyn Fn(f64) -> f64, r: f64, h: f64) -> f64 {
    (f(r - 2.0 * h) - 8.0 * f(r - h) + 8.0 * f(r + h) - f(r + 2.0 * h)) / (12.0 * h)
}

/// Whether the stencil's rounding floor `~ε|f|/h` sits two orders below the
/// tolerance relative to `f′`. Far out, `ψ″` is exponentially small next to
/// `ψ′` and no difference quotient of `ψ′` in double precision resolves it.
fn resolvable(f: f64, exact: f64, h: f64) -> bool {
    1.5 * f64::EPSILON * f.abs() / h <= 1e-8 * exact.abs()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn testfn_suite() -> Outcome {
    let l0 = 1.0;
    let instances = [
        ("zero", Phi1::Zero),
        ("log-ratio", Phi1::LogRatio { k: 1.0, l: l0 }),
        ("log-one-plus", Phi1::LogOnePlus { b: 1.0 }),
    ];
    let grid = log_grid(1e-6 * l0, 1e2 * l0, 1000);
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, phi1) in instances {
        let m = DriftModulus::new(phi1, None, l0, Some(1.0)).unwrap();
        let g = match build_g(&m, 0.5, 1.0) {
            Ok(g) => g,
            Err(e) => {
                ok = false;
                detail.push(format!("{name}: {e}"));
                continue;
            }
        };
        // c₂ = sup(−rg″/g′)/sup(rg′), c₁ = e^{−c₂ g(l₀)}
        let c2 = g.sup_neg_rg2_over_g1 / g.sup_rg1;
        let c1 = (-c2 * g.value(l0)).exp();
        let psi = build_psi(g.clone(), c1, c2, l0).unwrap();
        let g = &g;
        let two_l0 = 2.0 * l0;
        let lower = c1.min(psi.value(two_l0) / (4.0 * l0)).min(psi.d1(two_l0) / 4.0);
        let mut bad = Vec::new();
        let (mut e1, mut e2, mut e3) = (0.0f64, 0.0f64, 0.0f64);
        let mut skipped = 0;
        if psi.value(0.0) != 0.0 {
            bad.push("psi(0) != 0".to_string());
        }
        for &r in &grid {
            if !(psi.d1(r) > 0.0 && psi.d2(r) < 0.0) {
                bad.push(format!("sign of psi', psi'' at {r}"));
            }
            let v = psi.value(r);
            if !(lower * r <= v * (1.0 + 1e-12) && v <= (1.0 + c1) * r * (1.0 + 1e-12)) {
                bad.push(format!("linear bounds at {r}"));
            }
            let h = 1e-3 * r;
            let pairs: [(&dyn Fn(f64) -> f64, f64, &mut f64); 3] = [
                (&|x| psi.value(x), psi.d1(r), &mut e1),
                (&|x| psi.d1(x), psi.d2(r), &mut e2),
                (&|x| psi.d2(x), psi.d3(r), &mut e3),
            ];
            for (f, exact, err) in pairs {
                if resolvable(f(r), exact, h) {
                    *err = err.max(rel(diff(f, r, h), exact));
                } else {
                    skipped += 1;
                }
            }
            if r <= two_l0 {
                if !(psi.d3(r) >= 0.0) {
                    bad.push(format!("psi''' < 0 at {r}"));
                }
                if r < two_l0 / (1.0 + 3e-3) && !(diff(&|x| psi.d3(x), r, h) <= 1e-9 * psi.d3(r).abs()) {
                    bad.push(format!("psi'''' > 0 at {r}"));
                }
                if !(g.d1(r) >= 0.0 && g.d2(r) <= 0.0 && g.d3(r) >= 0.0) {
                    bad.push(format!("g sign pattern at {r}"));
                }
                if !(-r * g.d2(r) / g.d1(r) <= 2.0 - g.theta + 1e-12) {
                    bad.push(format!("-r g''/g' > 2 - theta at {r}"));
                }
            }
            if r <= l0 {
                for frac in [0.1, 0.5, 1.0] {
                    let d = frac * r;
                    let lhs = psi.value(r + d) + psi.value(r - d) - 2.0 * psi.value(r);
                    if !(lhs <= psi.d2(r) * d * d + 1e-12 * v) {
                        bad.push(format!("second difference at r = {r}, delta = {d}"));
                    }
                }
            }
        }
        let sup_ok = g.sup_neg_rg2_over_g1 <= 2.0 - g.theta + 1e-12;
        let fd_ok = e1 <= 1e-6 && e2 <= 1e-6 && e3 <= 1e-6;
        ok &= bad.is_empty() && sup_ok && fd_ok;
        detail.push(format!(
            "{name}: {} violations, fd rel err {e1:.1e}/{e2:.1e}/{e3:.1e} ({skipped} unresolvable), sup(-rg''/g') = {:.4}",
            bad.len(),
            g.sup_neg_rg2_over_g1
        ));
        if let Some(b) = bad.first() {
            detail.push(format!("first: {b}"));
        }
    }
    outcome(ok, detail.join("; "))
}

fn overlap_closed_form() -> Outcome {
    let nu = LevyMeasure::stable_truncated(0.5, 1.0).unwrap();
    let x: f64 = 0.25;
    // density z^{-3/2} on (0,1]: the overlap keeps (x, 1], antiderivative -2 z^{-1/2}
    let oracle = 2.0 * (x.powf(-0.5) - 1.0);
    let mass = nu.overlap(x).unwrap().mass.finite().unwrap_or(f64::NAN);
    let mut ok = (mass - 2.0).abs() <= 1e-8 && (oracle - 2.0).abs() <= 1e-15;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=10 {
        let x = 0.5f64.powi(k);
        let m = nu.overlap_mass(x).unwrap().finite().unwrap_or(f64::INFINITY);
        let bound = 2.0 * nu.tail_mass(x / 2.0).unwrap();
        ok &= m <= bound;
        worst = worst.max(m / bound);
    }
    outcome(ok, format!("mass(0.25) = {mass:.12}, max mu_x / 2nu(z > x/2) = {worst:.4}"))
}

fn coupling_structure() -> Outcome {
    let s = preset("case2-basic", Some(10_000));
    let (ens, _) = scenario::run_couple(&s).expect("coupled run");
    let violations = ens.total_violations();
    let gap = ens.max_gap_after_coalescence();
    let merged = ens.paths.iter().filter(|p| p.coalescence.is_finite()).count();
    let cfg = SimConfig { paths: 100_000, checkpoints: vec![0.5, 1.0], ..s.sim().clone() };
    let m = marginal_consistency_from(&s.coeffs, &s.nu, s.spec.x0, s.spec.y0, &cfg).expect("marginal run");
    let ks: Vec<String> = m.checkpoints.iter().map(|c| format!("KS({}) = {:.4}", c.t, c.ks)).collect();
    let ok = violations == 0 && gap == 0.0 && ens.failed.is_empty() && m.checkpoints.len() == 2 && m.passes(0.01);
    outcome(
        ok,
        format!(
            "{} paths, {merged} coalesced, {violations} violations, max gap after coalescence {gap}, {}",
            ens.paths.len(),
            ks.join(", ")
        ),
    )
}

fn strong_contrast() -> Outcome {
    let logistic = scenario::run_check(&preset("logistic", None)).strong;
    let cir = scenario::run_check(&preset("cir", None)).strong;
    let diverges = matches!(&cir, StrongBranch::Rejected(why) if why.contains("diverg"));
    let q = QuadratureSpec::default();
    let models = Config::presets().models;
    let Some(&ModelSpec::Cir { b, c: cc, d, .. }) = models.get("cir") else {
        return outcome(false, "cir preset is not a CIR model");
    };
    let times: Vec<f64> =
        [10.0, 1e2, 1e3, 1e4, 1e6].iter().map(|&x| cir_expected_hitting_time(x, b, cc, d, &q).unwrap()).collect();
    let increasing = times[..4].windows(2).all(|w| w[1] > w[0]);
    let ok = logistic.accepted() && diverges && increasing && times[4] > 2.0 * times[0];
    outcome(
        ok,
        format!(
            "logistic: {}, cir: {}, E tau(10, 1e2, 1e3, 1e4, 1e6) = {:.4?}",
            branch_str(&logistic),
            branch_str(&cir),
            times
        ),
    )
}

fn branch_str(b: &StrongBranch) -> String {
    match b {
        StrongBranch::Accepted { sup_psi, lambda_u } => format!("accepted (sup psi {sup_psi:.4}, rate {lambda_u:e})"),
        StrongBranch::Rejected(why) => format!("rejected ({why})"),
    }
}

fn tv_decay() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["logistic", "case2-stable"] {
        let c = couple(name, Some(100_000));
        let dec = c.t == [1.0, 2.0, 4.0, 8.0] && c.tv_strictly_decreasing();
        let rate = c.tv_fit.as_ref().map_or(f64::NAN, |f| f.lambda);
        ok &= dec && rate > 0.0;
        let tv: Vec<String> = c.tv.iter().map(|v| format!("{v:.4}")).collect();
        detail.push(format!("{name}: P(T > t) = [{}], rate {rate:.4}", tv.join(", ")));
    }
    outcome(ok, detail.join("; "))
}

fn negative_control() -> Outcome {
    let f = ClosureFn::new(|x| (-x * x).exp(), |x| -2.0 * x * (-x * x).exp(), |x| (4.0 * x * x - 2.0) * (-x * x).exp());
    let res = invariant_density_residual(&f, &QuadratureSpec::default()).unwrap();
    let mass = invariant_measure_mass();
    let partial: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|&e| invariant_mass_lower_bound(e)).collect();
    let ok = res.abs() <= 1e-6 && mass == Mass::Infinite && partial.windows(2).all(|w| w[1] > w[0]);
    outcome(ok, format!("residual = {res:e}, mass = {mass:?}, partial masses {partial:.3?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 CIR exact W1 rate", cir_rate),
        ("2 Lyapunov grid inequality", lyapunov_grid),
        ("3 test-function suite", testfn_suite),
        ("4 overlap closed form", overlap_closed_form),
        ("5 coupling structure", coupling_structure),
        ("6 strong vs non-strong contrast", strong_contrast),
        ("7 TV decay", tv_decay),
        ("8 negative control", negative_control),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.ok { "PASS" } else { "FAIL" };
        println!("acceptance {name}: {verdict} [{:.1}s] {}", start.elapsed().as_secs_f64(), o.detail);
        failed += usize::from(!o.ok);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

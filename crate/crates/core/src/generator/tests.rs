use super::*;
use crate::model::{CirDiffusion, CoefficientSet, LevyMeasure};
use crate::quad::QuadratureSpec;
use crate::testfn::{derive_constants, DriftModulus, JumpRoute, Phi1, Phi2, TheoremCase};

fn q() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn drift_grid() -> Vec<(f64, f64)> {
    pair_grid(1e-4, 200.0, 150, &[0.0, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0])
}

#[test]
fn drift_examples() {
    let c = CoefficientSet::log_drift(1.0, 1.0, 0.0, 0.0).unwrap();
    let m = DriftModulus::new(Phi1::LogOnePlus { b: 1.0 }, None, 2.0, Some(0.5)).unwrap();
    assert!(check_drift_condition(&c, &m, &drift_grid()).holds());

    let c = CoefficientSet::logistic(1.0, 1.0, 1.0, 1.0).unwrap();
    let m = DriftModulus::new(Phi1::Linear { k: 1.0 }, Some(Phi2::Power { coef: 0.5, p: 2.0 }), 2.0, None).unwrap();
    assert!(check_drift_condition(&c, &m, &drift_grid()).holds());
    let strong = check_dissipation_condition(&c, &m, &drift_grid());
    assert!(strong.holds(), "{strong}");
    assert!((strong.param("tail_integral").unwrap() - 1.0).abs() < 1e-12);

    let grow = CoefficientSet::new(
        "grow",
        std::sync::Arc::new(|x: f64| x),
        std::sync::Arc::new(|_| 0.0),
        std::sync::Arc::new(|_| 0.0),
    )
    .unwrap();
    let m = DriftModulus::new(Phi1::Zero, None, 1.0, Some(1.0)).unwrap();
    let r = check_drift_condition(&grow, &m, &drift_grid());
    match r.verdict {
        Verdict::FailsAt { margin, .. } => assert!(margin > 0.0),
        _ => panic!("pure growth must fail"),
    }
    assert!(!r.witnesses.is_empty());
}

#[test]
fn cir_dissipation_is_only_linear() {
    let c = CoefficientSet::cir(1.0, 0.5, 1.0, CirDiffusion::Literal).unwrap();
    let m = DriftModulus::new(Phi1::Zero, Some(Phi2::Linear { k: 1.0 }), 1.0, Some(1.0)).unwrap();
    assert!(check_drift_condition(&c, &m, &drift_grid()).holds());
    assert!(check_dissipation_condition(&c, &m, &drift_grid()).is_inapplicable());
}

#[test]
fn noise_cases() {
    let d = |case| NoiseDescriptor { case, l0: 1.0, kappa: 0.5 };
    let c = CoefficientSet::csbp(0.0, 1.0, 1.0, 0.0).unwrap();
    let r = check_noise_conditions(&c, &LevyMeasure::zero(), &d(NoiseCase::Case1));
    assert!(r.holds());
    assert_eq!(r.param("beta"), Some(1.0));
    assert!((r.param("liminf_ratio").unwrap() - 1.0).abs() < 1e-12);

    let c = CoefficientSet::csbp(0.0, 1.0, 0.0, 1.0).unwrap();
    let stable = LevyMeasure::stable_truncated(1.5, 1.0).unwrap();
    let r = check_noise_conditions(&c, &stable, &d(NoiseCase::Case2));
    assert!(r.holds(), "{r}");
    let want = (1.0 - 0.5f64.powf(1.5)) / 1.5;
    assert!((r.param("c_star").unwrap() - want).abs() < 1e-9);
    assert!((r.param("alpha").unwrap() - 1.5).abs() < 1e-9);
    assert!(matches!(r.case, Some(TheoremCase::A2 { route: JumpRoute::Overlap, .. })));

    let dyadic = LevyMeasure::dyadic_atoms(1.5, 60).unwrap();
    let r = check_noise_conditions(&c, &dyadic, &d(NoiseCase::Case3));
    assert!(r.holds(), "{r}");
    assert!(r.param("c_star_moment").unwrap() > 0.0);
    assert_eq!(r.param("c_star_overlap"), Some(0.0));
    assert!(matches!(r.case, Some(TheoremCase::A2 { route: JumpRoute::Difference, .. })));
    let r = check_noise_conditions(&c, &dyadic, &d(NoiseCase::Case2));
    assert!(!r.holds());
}

#[test]
fn tv_condition() {
    let m = DriftModulus::new(Phi1::Linear { k: 1.0 }, None, 1.0, Some(1.0)).unwrap();
    let case = TheoremCase::A2 { alpha: 1.5, beta: 1.0, c_star: 0.4, k3: 1.0, kappa: 0.5, route: JumpRoute::Overlap };
    assert!(check_tv_condition(&m, &case).holds());
    // Φ₁ = r with α − β − 1 = −1 leaves a constant
    let case = TheoremCase::A2 { alpha: 1.0, beta: 0.5, c_star: 0.4, k3: 1.0, kappa: 0.5, route: JumpRoute::Overlap };
    let _ = case;
    let case = TheoremCase::A1 { beta: 2.0 - 1e-9, k3: 1.0 };
    assert!(!check_tv_condition(&m, &case).holds());
}

fn case2_instance() -> (CoefficientSet, LevyMeasure, crate::testfn::ContractionConstants) {
    let c = CoefficientSet::csbp(0.0, 1.0, 0.0, 1.0).unwrap();
    let nu = LevyMeasure::stable_truncated(1.5, 1.0).unwrap();
    let d = NoiseDescriptor { case: NoiseCase::Case2, l0: 1.0, kappa: 0.5 };
    let case = check_noise_conditions(&c, &nu, &d).case.unwrap();
    let m = DriftModulus::new(Phi1::Zero, None, 1.0, Some(1.0)).unwrap();
    (c, nu, derive_constants(case, &m).unwrap())
}

#[test]
fn lyapunov_case2() {
    let (c, nu, k) = case2_instance();
    let pairs = pair_grid(1e-3, 10.0, 200, &BASE_POINTS);
    let spec = LyapunovSpec::from_constants(&k);
    let r = verify_lyapunov(&k.psi, &spec, &c, &nu, &pairs, &q());
    assert!(r.holds(), "{r}");
    assert!(r.param("max_margin").unwrap() <= 1e-6);

    let inflated = LyapunovSpec { lambda: 10.0 * k.lambda, ..spec };
    let mut found = false;
    for factor in [10.0, 100.0, 1000.0] {
        let s = LyapunovSpec { lambda: factor * k.lambda, ..inflated };
        if let Verdict::FailsAt { margin, .. } = verify_lyapunov(&k.psi, &s, &c, &nu, &pairs, &q()).verdict {
            assert!(margin > 0.0);
            found = true;
            break;
        }
    }
    assert!(found, "an inflated rate must fail somewhere");
    let rate = grid_rate(&k.psi, &spec, &c, &nu, &pairs, &q()).unwrap();
    assert!(rate >= k.lambda);
}

#[test]
fn concavity_transport_bypass() {
    let c = CoefficientSet::new(
        "drift-only",
        std::sync::Arc::new(|x: f64| -x * x),
        std::sync::Arc::new(|_| 0.0),
        std::sync::Arc::new(|_| 0.0),
    )
    .unwrap();
    let f = crate::testfn::ClosureFn::new(|r: f64| r.sqrt(), |r: f64| 0.5 / r.sqrt(), |r: f64| -0.25 * r.powf(-1.5));
    let nu = LevyMeasure::stable_truncated(1.5, 1.0).unwrap();
    let v = apply_coupling_l(&f, 2.0, 0.5, &c, &nu, 0.5, &q()).unwrap();
    assert_eq!(v, (c.gamma0(2.0) - c.gamma0(0.5)) * f.f1.as_ref()(1.5));
}

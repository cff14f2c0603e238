use rayon::prelude::*;

use super::operators::{coupling_l_split, CouplingKind};
use super::report::{ConditionReport, Witness};
use crate::error::Result;
use crate::model::{CoefficientSet, LevyMeasure, Mass};
use crate::quad::QuadratureSpec;
use crate::testfn::{log_grid, ContractionConstants, DriftModulus, JumpRoute, TestFn, TheoremCase};

/// Pairs `(y + r, y)` for `r` on a log grid up to `r_max` and a fixed set of
/// base points `y`.
pub fn pair_grid(r_min: f64, r_max: f64, nr: usize, ys: &[f64]) -> Vec<(f64, f64)> {
    let rs = log_grid(r_min, r_max, nr);
    ys.iter().flat_map(|&y| rs.iter().map(move |&r| (y + r, y))).collect()
}

/// Default base points for two-point grids.
pub const BASE_POINTS: [f64; 6] = [0.0, 0.01, 0.1, 1.0, 3.0, 10.0];

fn drift_tol(v: f64) -> f64 {
    1e-9 * (1.0 + v.abs())
}

/// `γ₀(x) − γ₀(y) ≤ Φ₁(x−y)` for `x−y ≤ l₀` and `≤ −k₂(x−y)` beyond.
pub fn check_drift_condition(coeffs: &CoefficientSet, modulus: &DriftModulus, grid: &[(f64, f64)]) -> ConditionReport {
    let k2 = modulus.k2();
    let margins: Vec<Witness> = grid
        .iter()
        .filter(|(x, y)| x > y)
        .map(|&(x, y)| {
            let r = x - y;
            let lhs = coeffs.gamma0(x) - coeffs.gamma0(y);
            let bound = if r <= modulus.l0 { modulus.phi1.eval(r) } else { -k2 * r };
            Witness { x, y, margin: lhs - bound - drift_tol(bound) }
        })
        .collect();
    ConditionReport::from_margins("Eq3.1", &margins, 0.0)
        .with_param("l0", modulus.l0)
        .with_param("k2", k2)
}

/// `γ₀(x) − γ₀(y) ≤ −Φ₂(x−y)` for `x−y > l₀`.
pub fn check_dissipation_condition(
    coeffs: &CoefficientSet,
    modulus: &DriftModulus,
    grid: &[(f64, f64)],
) -> ConditionReport {
    let Some(phi2) = modulus.phi2 else {
        return ConditionReport::inapplicable("Eq3.4", "no dissipation modulus Phi2");
    };
    let margins: Vec<Witness> = grid
        .iter()
        .filter(|(x, y)| x - y > modulus.l0)
        .map(|&(x, y)| {
            let bound = -phi2.eval(x - y);
            let lhs = coeffs.gamma0(x) - coeffs.gamma0(y);
            Witness { x, y, margin: lhs - bound - drift_tol(bound) }
        })
        .collect();
    let mut r = ConditionReport::from_margins("Eq3.4", &margins, 0.0).with_param("l0", modulus.l0);
    match modulus.phi2_tail() {
        Mass::Finite(t) => r.params.push(("tail_integral".into(), t)),
        Mass::Infinite => {
            r.notes.push("integral of 1/Phi2 over [l0, inf) diverges".into());
            r.verdict = super::Verdict::Inapplicable("integral of 1/Phi2 diverges".into());
        }
    }
    r
}

/// Which noise assumption to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCase {
    A1,
    A2,
    /// Strictly positive diffusion with power behaviour at 0 (maps to A1).
    Case1,
    /// Stable-like small jumps with the overlap bound (A2, overlap route).
    Case2,
    /// Increasing branching rate, possibly singular `ν` (A2, difference route).
    Case3,
}

impl NoiseCase {
    pub fn id(&self) -> &'static str {
        match self {
            NoiseCase::A1 => "A1",
            NoiseCase::A2 => "A2",
            NoiseCase::Case1 => "Thm1.1-case1",
            NoiseCase::Case2 => "Thm1.1-case2",
            NoiseCase::Case3 => "Thm1.1-case3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDescriptor {
    pub case: NoiseCase,
    pub l0: f64,
    pub kappa: f64,
}

/// Points `2^{−k}`, `k = 1..=40`.
pub fn dyadic_grid() -> Vec<f64> {
    (1..=40).map(|k| 0.5f64.powi(k)).collect()
}

/// Log-log slope of `h` near zero, from `2^{−30}` to `2^{−40}`, rounded to 1e-6.
fn small_scale_exponent(h: impl Fn(f64) -> f64) -> Option<f64> {
    let (a, b) = (0.5f64.powi(30), 0.5f64.powi(40));
    let (ha, hb) = (h(a), h(b));
    if !(ha > 0.0 && hb > 0.0) {
        return None;
    }
    let s = (ha.ln() - hb.ln()) / (a.ln() - b.ln());
    Some((s * 1e6).round() / 1e6)
}

/// Points on `(0, l]` for infima: dyadic down to `2^{−40}` plus a linear sweep.
fn inf_grid(l: f64) -> Vec<f64> {
    let mut g: Vec<f64> = dyadic_grid().into_iter().map(|u| u * l).collect();
    g.extend((1..=200).map(|i| l * i as f64 / 200.0));
    g
}

fn base_points() -> Vec<f64> {
    let mut ys = vec![0.0];
    ys.extend(log_grid(1e-6, 1e2, 40));
    ys
}

fn check_a1(coeffs: &CoefficientSet, d: &NoiseDescriptor) -> ConditionReport {
    let id = d.case.id();
    let Some(beta_hat) = small_scale_exponent(|x| coeffs.gamma1(x)) else {
        return ConditionReport::inapplicable(id, "gamma1 vanishes near 0");
    };
    let beta = beta_hat.max(1.0);
    if beta >= 2.0 {
        return ConditionReport::inapplicable(id, format!("gamma1 decays like x^{beta_hat} near 0, needs beta < 2"));
    }
    let mut k3 = f64::INFINITY;
    let mut worst = (0.0, 0.0);
    for r in inf_grid(d.l0) {
        for y in base_points() {
            let v = (coeffs.gamma1(y + r) + coeffs.gamma1(y)) / r.powf(beta);
            if v < k3 {
                k3 = v;
                worst = (y + r, y);
            }
        }
    }
    let liminf = coeffs.gamma1(0.5f64.powi(40)) / 0.5f64.powi(40).powf(beta);
    let mut r = ConditionReport::new(id)
        .with_param("beta", beta)
        .with_param("k3", k3)
        .with_param("liminf_ratio", liminf)
        .with_param("l0", d.l0);
    if k3 > 0.0 && k3.is_finite() {
        r.case = Some(TheoremCase::A1 { beta, k3 });
    } else {
        r.verdict = super::Verdict::FailsAt { x: worst.0, y: worst.1, margin: -k3 };
        r.witnesses.push(Witness { x: worst.0, y: worst.1, margin: -k3 });
    }
    r
}

fn check_a2(coeffs: &CoefficientSet, nu: &LevyMeasure, d: &NoiseDescriptor) -> ConditionReport {
    let id = d.case.id();
    if nu.is_zero() {
        return ConditionReport::inapplicable(id, "no jumps");
    }
    let m2 = |r: f64| nu.truncated_second_moment(r).unwrap_or(f64::NAN);
    let Some(slope) = small_scale_exponent(m2) else {
        return ConditionReport::inapplicable(id, "second moment vanishes near 0");
    };
    let alpha = 2.0 - slope;
    if !(alpha > 0.0 && alpha < 2.0) {
        return ConditionReport::inapplicable(id, format!("small-jump index {alpha} outside (0,2)"));
    }
    // ∫_0^r z²ν ≥ C r^{2−α} on (0,1]
    let c_moment = inf_grid(1.0).into_iter().map(|r| m2(r) / r.powf(2.0 - alpha)).fold(f64::INFINITY, f64::min);
    // inf over (0,κ] of z^α μ_z(ℝ₊); off-dyadic points expose singular measures
    let kappa = d.kappa.min(1.0);
    let mut zs = inf_grid(kappa);
    zs.extend(dyadic_grid().into_iter().map(|u| 0.7 * kappa * u));
    let c_overlap = zs
        .iter()
        .map(|&z| match nu.overlap_mass(z) {
            Ok(Mass::Finite(m)) => z.powf(alpha) * m,
            _ => 0.0,
        })
        .fold(f64::INFINITY, f64::min);

    let g2_exp = small_scale_exponent(|x| coeffs.gamma2(x));
    let overlap_route = || -> Option<(f64, f64)> {
        let beta = g2_exp?.max(alpha - 1.0).max(1e-12);
        if beta >= alpha {
            return None;
        }
        let k3 = inf_grid(d.l0).into_iter().map(|x| coeffs.gamma2(x) / x.powf(beta)).fold(f64::INFINITY, f64::min);
        (k3 > 0.0 && c_overlap > 0.0).then_some((beta, k3))
    };
    let difference_route = || -> Option<(f64, f64)> {
        let beta = small_scale_exponent(|r| coeffs.gamma2(r) - coeffs.gamma2(0.0))?.max(alpha - 1.0).max(1e-12);
        if beta >= alpha {
            return None;
        }
        let mut k3 = f64::INFINITY;
        for r in inf_grid(d.l0) {
            for y in base_points() {
                k3 = k3.min((coeffs.gamma2(y + r) - coeffs.gamma2(y)) / r.powf(beta));
            }
        }
        (k3 > 0.0).then_some((beta, k3))
    };
    let chosen = match d.case {
        NoiseCase::Case2 => overlap_route().map(|v| (v, JumpRoute::Overlap)),
        NoiseCase::Case3 => difference_route().map(|v| (v, JumpRoute::Difference)),
        _ => overlap_route()
            .map(|v| (v, JumpRoute::Overlap))
            .or_else(|| difference_route().map(|v| (v, JumpRoute::Difference))),
    };
    let mut r = ConditionReport::new(id)
        .with_param("alpha", alpha)
        .with_param("c_star_moment", c_moment)
        .with_param("c_star_overlap", c_overlap)
        .with_param("kappa", kappa)
        .with_param("l0", d.l0);
    if c_overlap <= 0.0 {
        r.notes.push("overlap bound on (0, kappa] fails: the mu_z route is inapplicable".into());
    }
    if !(c_moment > 0.0) {
        r.verdict = super::Verdict::FailsAt { x: 0.0, y: 0.0, margin: -c_moment };
        r.witnesses.push(Witness { x: 0.0, y: 0.0, margin: -c_moment });
        return r;
    }
    match chosen {
        Some(((beta, k3), route)) => {
            let c_star = match route {
                JumpRoute::Overlap => c_moment.min(c_overlap),
                JumpRoute::Difference => c_moment,
            };
            r.params.push(("beta".into(), beta));
            r.params.push(("k3".into(), k3));
            r.params.push(("c_star".into(), c_star));
            r.notes.push(format!("route: {route:?}"));
            r.case = Some(TheoremCase::A2 { alpha, beta, c_star, k3, kappa, route });
        }
        None => {
            r.verdict = super::Verdict::Inapplicable("no jump route yields k3 > 0 with beta in [alpha-1, alpha)".into());
        }
    }
    r
}

/// Estimates the parameters of the selected noise assumption on geometric
/// grids; the recovered `TheoremCase` is attached to the report.
pub fn check_noise_conditions(coeffs: &CoefficientSet, nu: &LevyMeasure, d: &NoiseDescriptor) -> ConditionReport {
    match d.case {
        NoiseCase::A1 | NoiseCase::Case1 => check_a1(coeffs, d),
        NoiseCase::A2 | NoiseCase::Case2 | NoiseCase::Case3 => check_a2(coeffs, nu, d),
    }
}

/// `Φ₁(r) r^{γ} → 0` on `r = 2^{−k}`, with `γ = 1−β` under (A1) and
/// `α−β−1` under (A2).
pub fn check_tv_condition(modulus: &DriftModulus, case: &TheoremCase) -> ConditionReport {
    let gamma = match *case {
        TheoremCase::A1 { beta, .. } => 1.0 - beta,
        TheoremCase::A2 { alpha, beta, .. } => alpha - beta - 1.0,
    };
    let vals: Vec<f64> = dyadic_grid().iter().map(|&r| modulus.phi1.eval(r) * r.powf(gamma)).collect();
    let tail = vals[vals.len() - 5..].iter().cloned().fold(0.0, f64::max);
    let decreasing = vals[vals.len() - 10..].windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let mut r = ConditionReport::new("Thm3.2").with_param("exponent", gamma).with_param("tail_value", tail);
    if !(tail < 1e-3 && decreasing) {
        r.verdict = super::Verdict::FailsAt { x: 0.5f64.powi(40), y: 0.0, margin: tail };
        r.witnesses.push(Witness { x: 0.5f64.powi(40), y: 0.0, margin: tail });
    }
    r
}

/// What the Lyapunov inequality compares `L̃f` against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LyapunovMode {
    /// `L̃f ≤ −λ f`
    Proportional,
    /// `L̃f ≤ −λ`
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSpec {
    pub lambda: f64,
    pub mode: LyapunovMode,
    pub kappa: f64,
    /// Split of the jump integral at `c₀ r`.
    pub c0: f64,
    pub kind: CouplingKind,
    pub tol: f64,
}

impl LyapunovSpec {
    pub fn from_constants(c: &ContractionConstants) -> Self {
        LyapunovSpec {
            lambda: c.lambda,
            mode: LyapunovMode::Proportional,
            kappa: c.kappa.unwrap_or(1.0),
            c0: c.c0,
            kind: CouplingKind::Refined,
            tol: 1e-6,
        }
    }
}

fn operator_values(
    f: &dyn TestFn,
    spec: &LyapunovSpec,
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    pairs: &[(f64, f64)],
    q: &QuadratureSpec,
) -> Vec<Result<f64>> {
    pairs
        .par_iter()
        .map(|&(x, y)| coupling_l_split(f, x, y, coeffs, nu, spec.kappa, spec.kind, Some(spec.c0 * (x - y)), q))
        .collect()
}

/// Evaluates `L̃f + λf` (or `L̃f + λ`) at every pair; holds iff the
/// maximum is at most `spec.tol`.
pub fn verify_lyapunov(
    f: &dyn TestFn,
    spec: &LyapunovSpec,
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    pairs: &[(f64, f64)],
    q: &QuadratureSpec,
) -> ConditionReport {
    let id = match spec.mode {
        LyapunovMode::Proportional => "Lyapunov",
        LyapunovMode::Uniform => "Lyapunov-uniform",
    };
    let vals = operator_values(f, spec, coeffs, nu, pairs, q);
    let mut margins = Vec::with_capacity(pairs.len());
    let mut errors = Vec::new();
    for (&(x, y), v) in pairs.iter().zip(vals) {
        match v {
            Ok(lf) => {
                let rhs = match spec.mode {
                    LyapunovMode::Proportional => spec.lambda * f.value(x - y),
                    LyapunovMode::Uniform => spec.lambda,
                };
                margins.push(Witness { x, y, margin: lf + rhs });
            }
            Err(e) => {
                errors.push(format!("({x}, {y}): {e}"));
                margins.push(Witness { x, y, margin: f64::INFINITY });
            }
        }
    }
    let mut r = ConditionReport::from_margins(id, &margins, spec.tol).with_param("lambda", spec.lambda);
    r.params.push(("points".into(), pairs.len() as f64));
    r.notes.extend(errors);
    r
}

/// `min −L̃f / f` over the grid: the largest proportional rate the grid
/// supports. Non-negative when `L̃f ≤ 0` everywhere.
pub fn grid_rate(
    f: &dyn TestFn,
    spec: &LyapunovSpec,
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    pairs: &[(f64, f64)],
    q: &QuadratureSpec,
) -> Result<f64> {
    let vals = operator_values(f, spec, coeffs, nu, pairs, q);
    let mut rate = f64::INFINITY;
    for (&(x, y), v) in pairs.iter().zip(vals) {
        let lf = v?;
        let denom = match spec.mode {
            LyapunovMode::Proportional => f.value(x - y),
            LyapunovMode::Uniform => 1.0,
        };
        rate = rate.min(-lf / denom);
    }
    Ok(rate)
}

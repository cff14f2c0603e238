use std::fmt;

use super::{build_g, build_psi, DriftModulus, GFunction, PsiFunction, TestFn};
use crate::error::{Error, Result};

/// How the jump part supplies contraction under (A2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpRoute {
    /// `γ₂(x) ≥ k₃ x^β` together with `μ_z(ℝ₊) ≥ C_* z^{−α}` on `(0, κ]`.
    Overlap,
    /// `γ₂(x) − γ₂(y) ≥ k₃ (x−y)^β`; the overlap term is dropped.
    Difference,
}

/// Which noise assumption drives the contraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TheoremCase {
    /// Diffusion: `γ₁(x) + γ₁(y) ≥ k₃ (x−y)^β`, `β ∈ [1,2)`.
    A1 { beta: f64, k3: f64 },
    /// Jumps: `∫_0^r z²ν(dz) ≥ C_* r^{2−α}` plus the route condition.
    A2 { alpha: f64, beta: f64, c_star: f64, k3: f64, kappa: f64, route: JumpRoute },
}

impl TheoremCase {
    fn validate(&self) -> Result<()> {
        match *self {
            TheoremCase::A1 { beta, k3 } => {
                if !((1.0..2.0).contains(&beta) && k3 > 0.0) {
                    return Err(Error::Domain(format!("A1 needs beta in [1,2) and k3 > 0, got {beta}, {k3}")));
                }
            }
            TheoremCase::A2 { alpha, beta, c_star, k3, kappa, .. } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(Error::Domain(format!("alpha must lie in (0,2), got {alpha}")));
                }
                if !(beta >= alpha - 1.0 && beta < alpha && beta > 0.0) {
                    return Err(Error::Domain(format!("beta must lie in [alpha-1, alpha) and be positive, got {beta}")));
                }
                if !(c_star > 0.0 && k3 > 0.0 && kappa > 0.0) {
                    return Err(Error::Domain("C*, k3 and kappa must be positive".into()));
                }
            }
        }
        Ok(())
    }

    fn theta(&self) -> f64 {
        match *self {
            TheoremCase::A1 { beta, .. } => 2.0 - beta,
            TheoremCase::A2 { alpha, beta, .. } => alpha - beta,
        }
    }

    fn label(&self) -> String {
        match *self {
            TheoremCase::A1 { beta, k3 } => format!("A1 (diffusion, beta = {beta}, k3 = {k3})"),
            TheoremCase::A2 { alpha, beta, route, .. } => {
                let r = match route {
                    JumpRoute::Overlap => "overlap",
                    JumpRoute::Difference => "difference",
                };
                format!("A2 (jumps, {r} route, alpha = {alpha}, beta = {beta})")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContractionConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub lambda: f64,
    /// `C` in `W₁(P_t(x,·), P_t(y,·)) ≤ C e^{−λt} |x−y|`.
    pub prefactor: f64,
    pub theta: f64,
    /// Effective `l₀` (raised to at least 1).
    pub l0: f64,
    /// Effective `κ` (capped at 1), when the overlap route is used.
    pub kappa: Option<f64>,
    pub k2: f64,
    pub case: TheoremCase,
    pub provenance: String,
    pub modulus: DriftModulus,
    pub psi: PsiFunction,
}

impl ContractionConstants {
    pub fn g(&self) -> &GFunction {
        &self.psi.g
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("provenance".to_string(), self.provenance.clone()),
            ("theta".to_string(), format!("{:?}", self.theta)),
            ("l0".to_string(), format!("{:?}", self.l0)),
            ("k2".to_string(), format!("{:?}", self.k2)),
            ("c0".to_string(), format!("{:?}", self.c0)),
            ("c1".to_string(), format!("{:?}", self.c1)),
            ("c2".to_string(), format!("{:?}", self.c2)),
            ("c3".to_string(), format!("{:?}", self.c3)),
            ("lambda".to_string(), format!("{:?}", self.lambda)),
            ("C".to_string(), format!("{:?}", self.prefactor)),
        ];
        if let Some(k) = self.kappa {
            kv.push(("kappa".to_string(), format!("{k:?}")));
        }
        kv
    }
}

impl fmt::Display for ContractionConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_kv() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

struct Trial {
    g: GFunction,
    c0: f64,
    c2: f64,
    /// Rate factor `K` with the `c₃` requirement `c₃ K ≥ 2`.
    k: f64,
}

fn trial(case: &TheoremCase, m: &DriftModulus, theta: f64, kappa: f64, c3: f64) -> Result<Trial> {
    let g = build_g(m, theta, c3)?;
    let (s1, s2) = (g.sup_neg_rg2_over_g1, g.sup_rg1);
    if !s1.is_finite() || !s2.is_finite() || !(s2 > 0.0) {
        return Err(Error::Precondition(format!(
            "suprema of -r g''/g' ({s1}) and r g' ({s2}) over (0, 2 l0] must be finite and positive"
        )));
    }
    let c0 = if s1 > 0.0 { (1.0 / m.l0).min(1.0 / s1) } else { 1.0 / m.l0 };
    let c2 = if s1 > 1e-14 { s1 / s2 } else { 1.0 / s2 };
    let k = match *case {
        TheoremCase::A1 { k3, .. } => 0.5 * c2 * k3,
        TheoremCase::A2 { alpha, c_star, k3, route, .. } => {
            let via_c0 = c0.powf(2.0 - alpha) / 3.0;
            let m = match route {
                JumpRoute::Overlap => (kappa / m.l0).powf(2.0 - alpha).min(via_c0),
                JumpRoute::Difference => via_c0,
            };
            0.5 * c_star * c2 * k3 * m
        }
    };
    Ok(Trial { g, c0, c2, k })
}

/// Assembles `c₀, c₁, c₂, c₃, λ, C` for the given noise case.
///
/// `c₃` must satisfy `c₃ K(c₃) ≥ 2` where `K` itself depends on `c₃`
/// through `g`; it is found by fixed-point iteration, then by doubling.
/// Under (A1) `c₂` may be enlarged instead when no such `c₃` exists.
pub fn derive_constants(case: TheoremCase, modulus: &DriftModulus) -> Result<ContractionConstants> {
    case.validate()?;
    let mut m = *modulus;
    m.l0 = m.l0.max(1.0);
    let kappa = match case {
        TheoremCase::A2 { kappa, .. } => kappa.min(1.0),
        TheoremCase::A1 { .. } => 1.0,
    };
    let theta = case.theta();

    let (c3, mut t) = if m.phi1.is_zero() {
        let t = trial(&case, &m, theta, kappa, 1.0)?;
        (2.0 / t.k, t)
    } else {
        let mut c3 = 2.0 / trial(&case, &m, theta, kappa, 0.0)?.k;
        for _ in 0..100 {
            let next = 2.0 / trial(&case, &m, theta, kappa, c3)?.k;
            let done = (next - c3).abs() <= 1e-12 * c3;
            c3 = next;
            if done {
                break;
            }
        }
        let mut found = None;
        for _ in 0..60 {
            let t = trial(&case, &m, theta, kappa, c3)?;
            if c3 * t.k >= 2.0 * (1.0 - 1e-9) {
                found = Some((c3, t));
                break;
            }
            c3 *= 2.0;
        }
        match (found, case) {
            (Some(v), _) => v,
            (None, TheoremCase::A1 { k3, .. }) => {
                let mut t = trial(&case, &m, theta, kappa, 1.0)?;
                t.c2 = t.c2.max(4.0 / k3);
                t.k = 0.5 * t.c2 * k3;
                (1.0, t)
            }
            (None, TheoremCase::A2 { .. }) => {
                return Err(Error::Precondition(
                    "no c3 satisfies c3 K(c3) >= 2: the drift modulus is too strong for the jump noise".into(),
                ))
            }
        }
    };
    // Φ₁ ≡ 0 leaves g independent of c₃
    if m.phi1.is_zero() {
        t.g.c0g = c3;
    }

    let c2 = t.c2;
    let decay = (-c2 * t.g.value(m.l0)).exp();
    let c1 = decay;
    let psi = build_psi(t.g, c1, c2, m.l0)?;
    let k2 = m.k2();
    let near = t.k * theta * decay;
    let far = 0.5 * k2 * psi.d1(2.0 * m.l0);
    let lambda = near.min(far) / (1.0 + c1);
    let prefactor = (1.0 + c1) / psi.lower_slope();
    if !(lambda > 0.0 && lambda.is_finite() && prefactor.is_finite()) {
        return Err(Error::Validation(format!("degenerate constants: lambda = {lambda}, C = {prefactor}")));
    }
    Ok(ContractionConstants {
        c0: t.c0,
        c1,
        c2,
        c3,
        lambda,
        prefactor,
        theta,
        l0: m.l0,
        kappa: matches!(case, TheoremCase::A2 { route: JumpRoute::Overlap, .. }).then_some(kappa),
        k2,
        provenance: case.label(),
        case,
        modulus: m,
        psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::{Phi1, Phi2};

    fn case2() -> TheoremCase {
        // ν = z^{−2.5} on (0,1]: C_* = min{2, (1 − κ^{1.5})/1.5} at κ = 1/2
        let c_star = (1.0 - 0.5f64.powf(1.5)) / 1.5;
        TheoremCase::A2 { alpha: 1.5, beta: 1.0, c_star, k3: 1.0, kappa: 0.5, route: JumpRoute::Overlap }
    }

    #[test]
    fn root_case_constants() {
        let m = DriftModulus::new(Phi1::Zero, None, 1.0, Some(1.0)).unwrap();
        let c = derive_constants(case2(), &m).unwrap();
        assert!((c.c2 - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((c.c0 - 1.0).abs() < 1e-12);
        assert!((c.c1 - (-(0.5f64.sqrt())).exp()).abs() < 1e-12);
        assert!((c.c1 - 0.49307).abs() < 1e-5);
        // direct evaluation of the rate formula
        let c_star = (1.0 - 0.5f64.powf(1.5)) / 1.5;
        let k = 0.5 * c_star * c.c2 * (0.5f64.sqrt()).min(1.0 / 3.0);
        let psi1 = c.c1 + (-c.c2 * 2f64.sqrt()).exp();
        let lambda = (k * 0.5 * c.c1).min(0.5 * psi1) / (1.0 + c.c1);
        assert!((c.lambda - lambda).abs() < 1e-12 * lambda);
        assert!(c.prefactor > 1.0);
    }

    #[test]
    fn cir_case_rate_is_below_mean_reversion() {
        let m = DriftModulus::new(Phi1::Zero, None, 1.0, Some(1.0)).unwrap();
        let c = derive_constants(TheoremCase::A1 { beta: 1.0, k3: 1.0 }, &m).unwrap();
        assert!(c.lambda > 0.0 && c.lambda <= 1.0);
        assert!((c.c2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nonzero_modulus_and_determinism() {
        let m = DriftModulus::new(Phi1::Linear { k: 1.0 }, Some(Phi2::Power { coef: 0.5, p: 2.0 }), 2.0, None).unwrap();
        let a = derive_constants(TheoremCase::A1 { beta: 1.0, k3: 1.0 }, &m).unwrap();
        let b = derive_constants(TheoremCase::A1 { beta: 1.0, k3: 1.0 }, &m).unwrap();
        assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
        assert!(a.lambda > 0.0);
        let m = DriftModulus::new(Phi1::LogRatio { k: 0.2, l: 1.0 }, None, 1.0, Some(1.0)).unwrap();
        let c = derive_constants(case2(), &m);
        match c {
            Ok(c) => assert!(c.c3 * 2.0 > 0.0 && c.lambda > 0.0),
            Err(e) => assert!(matches!(e, Error::Precondition(_))),
        }
    }

    #[test]
    fn rejects_bad_case() {
        let m = DriftModulus::new(Phi1::Zero, None, 1.0, Some(1.0)).unwrap();
        assert!(derive_constants(TheoremCase::A1 { beta: 2.0, k3: 1.0 }, &m).is_err());
        let bad = TheoremCase::A2 { alpha: 1.5, beta: 0.2, c_star: 1.0, k3: 1.0, kappa: 0.5, route: JumpRoute::Overlap };
        assert!(derive_constants(bad, &m).is_err());
    }
}

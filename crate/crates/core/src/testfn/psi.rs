use std::sync::Arc;

use super::{log_grid, CumulativeCache, DriftModulus, GFunction, Phi2, TestFn};
use crate::error::{Error, Result};
use crate::model::Mass;
use crate::quad::QuadratureSpec;

/// Which extension of `ψ` is used beyond `2l₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiVariant {
    /// Concave exponential bridge to slope `ψ′(2l₀)/2`; `ψ` grows linearly.
    Wasserstein,
    /// Bounded extension driven by `1/Φ₂`.
    StrongErgodic { a: f64, b: f64, delta: f64, phi2: Phi2 },
}

/// `ψ(r) = c₁ r + ∫_0^r e^{−c₂ g(s)} ds` on `[0, 2l₀]`, extended as a C²
/// concave function beyond.
#[derive(Debug, Clone)]
pub struct PsiFunction {
    pub c1: f64,
    pub c2: f64,
    pub g: GFunction,
    pub l0: f64,
    pub variant: PsiVariant,
    /// `ψ(2l₀)`, `ψ′(2l₀)`, `ψ″(2l₀)`
    pub at_2l0: (f64, f64, f64),
    cache: Arc<CumulativeCache>,
}

impl PsiFunction {
    fn weight(&self, s: f64) -> f64 {
        (-self.c2 * self.g.value(s)).exp()
    }

    fn inner(&self, r: f64) -> (f64, f64, f64, f64) {
        let e = self.weight(r);
        let (g1, g2) = (self.g.d1(r), self.g.d2(r));
        let v = self.c1 * r + self.cache.eval(&|s| self.weight(s), r);
        let d1 = self.c1 + e;
        let d2 = -self.c2 * g1 * e;
        let d3 = (self.c2 * self.c2 * g1 * g1 - self.c2 * g2) * e;
        (v, d1, d2, d3)
    }

    /// Value and first three derivatives of the extension at `s = r − 2l₀ > 0`.
    fn outer(&self, s: f64) -> (f64, f64, f64, f64) {
        let (v0, p1, p2) = self.at_2l0;
        let c = 2.0 * self.l0;
        match self.variant {
            PsiVariant::Wasserstein => {
                let k = 2.0 * p2 / p1;
                let e = (k * s).exp();
                (v0 + 0.5 * p1 * (s + (k * s).exp_m1() / k), 0.5 * p1 * (1.0 + e), p2 * e, p2 * k * e)
            }
            PsiVariant::StrongErgodic { a, b, delta, phi2 } => {
                let i1 = phi2.inverse_integral(c, b * s + c).finite().unwrap_or(f64::NAN) / b;
                let i2 = phi2.inverse_integral(c, s + c).finite().unwrap_or(f64::NAN);
                let term = |scale: f64, v: f64| {
                    let (f, f1, f2) = (phi2.eval(v), phi2.d1(v), phi2.d2(v));
                    (1.0 / f, -scale * f1 / (f * f), scale * scale * (2.0 * f1 * f1 / (f * f * f) - f2 / (f * f)))
                };
                let (u0, u1, u2) = term(b, b * s + c);
                let (w0, w1, w2) = term(1.0, s + c);
                (v0 + a * i1 + delta * a * i2, a * u0 + delta * a * w0, a * u1 + delta * a * w1, a * u2 + delta * a * w2)
            }
        }
    }

    fn all(&self, r: f64) -> (f64, f64, f64, f64) {
        if r <= 0.0 {
            let d1 = self.c1 + 1.0;
            return (0.0, d1, -self.c2 * self.g.d1(f64::MIN_POSITIVE), f64::NAN);
        }
        let c = 2.0 * self.l0;
        if r <= c {
            self.inner(r)
        } else {
            self.outer(r - c)
        }
    }

    /// Two-sided lower bound constant `min{c₁, ψ(2l₀)/(4l₀), ψ′(2l₀)/4}`.
    pub fn lower_slope(&self) -> f64 {
        let (v, p1, _) = self.at_2l0;
        self.c1.min(v / (4.0 * self.l0)).min(p1 / 4.0)
    }

    /// `sup ψ`, infinite for the Wasserstein variant.
    pub fn sup(&self) -> Mass {
        match self.variant {
            PsiVariant::Wasserstein => Mass::Infinite,
            PsiVariant::StrongErgodic { a, b, delta, phi2 } => {
                let t = phi2.tail_integral(2.0 * self.l0).finite().unwrap_or(f64::INFINITY);
                Mass::Finite(self.at_2l0.0 + a * (1.0 / b + delta) * t)
            }
        }
    }

    /// Difference of the two one-sided formulas (value, ψ′, ψ″) at `2l₀`.
    pub fn gluing_defect(&self) -> f64 {
        let inner = self.inner(2.0 * self.l0);
        let outer = self.outer(0.0);
        (inner.0 - outer.0).abs().max((inner.1 - outer.1).abs()).max((inner.2 - outer.2).abs())
    }

    /// CSV table `r,psi,psi1,psi2` over the given grid.
    pub fn to_csv(&self, grid: &[f64]) -> String {
        super::table_csv(self, grid)
    }
}

impl TestFn for PsiFunction {
    fn value(&self, r: f64) -> f64 {
        self.all(r).0
    }
    fn d1(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.c1 + 1.0;
        }
        if r <= 2.0 * self.l0 {
            self.c1 + self.weight(r)
        } else {
            self.outer(r - 2.0 * self.l0).1
        }
    }
    fn d2(&self, r: f64) -> f64 {
        if r > 0.0 && r <= 2.0 * self.l0 {
            -self.c2 * self.g.d1(r) * self.weight(r)
        } else {
            self.all(r).2
        }
    }
    fn d3(&self, r: f64) -> f64 {
        self.all(r).3
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn assemble(g: GFunction, c1: f64, c2: f64, l0: f64) -> Result<PsiFunction> {
    check_positive("c1", c1)?;
    check_positive("c2", c2)?;
    check_positive("l0", l0)?;
    let gc = g.clone();
    let weight = move |s: f64| (-c2 * gc.value(s)).exp();
    let cache = Arc::new(CumulativeCache::build(&weight, 2.0 * l0, &QuadratureSpec::default())?);
    let mut psi = PsiFunction { c1, c2, g, l0, variant: PsiVariant::Wasserstein, at_2l0: (0.0, 0.0, 0.0), cache };
    let (v, d1, d2, _) = psi.inner(2.0 * l0);
    if !(d2 < 0.0) {
        return Err(Error::Validation(format!("psi''(2 l0) = {d2} is not negative; g' vanishes")));
    }
    psi.at_2l0 = (v, d1, d2);
    Ok(psi)
}

/// Checks `ψ′ > 0`, `ψ″ < 0` on `(10⁻⁶ l₀, 10² l₀)`, plus the linear
/// two-sided bounds for the unbounded variant.
fn validate(psi: &PsiFunction) -> Result<()> {
    let lower = psi.lower_slope();
    for r in log_grid(1e-6 * psi.l0, 1e2 * psi.l0, 1000) {
        let (v, d1, d2, _) = psi.all(r);
        if !(d1 > 0.0) || !(d2 < 0.0) {
            return Err(Error::Validation(format!("psi fails monotone concavity at r = {r}: psi' = {d1}, psi'' = {d2}")));
        }
        if psi.variant == PsiVariant::Wasserstein {
            let tol = 1e-12 * v.abs().max(r);
            if v > (1.0 + psi.c1) * r + tol || v < lower * r - tol {
                return Err(Error::Validation(format!("psi({r}) = {v} violates the linear bounds")));
            }
        }
    }
    let defect = psi.gluing_defect();
    if defect > 1e-8 {
        return Err(Error::Validation(format!("C2 gluing defect {defect} at 2 l0")));
    }
    Ok(())
}

pub fn build_psi(g: GFunction, c1: f64, c2: f64, l0: f64) -> Result<PsiFunction> {
    let psi = assemble(g, c1, c2, l0)?;
    validate(&psi)?;
    Ok(psi)
}

/// Bounded variant: beyond `2l₀`, `ψ′(r) = A/Φ₂(B s + 2l₀) + δA/Φ₂(s + 2l₀)`
/// with `s = r − 2l₀`; `δ` is halved until `B > 0`.
pub fn build_strong_psi(g: GFunction, c1: f64, c2: f64, modulus: &DriftModulus, delta: f64) -> Result<PsiFunction> {
    check_positive("delta", delta)?;
    let phi2 = modulus.phi2.ok_or_else(|| {
        Error::Precondition("no dissipation modulus Phi2: strong ergodicity test function unavailable".into())
    })?;
    if phi2.tail_integral(modulus.l0).is_infinite() {
        return Err(Error::Precondition(
            "integral of 1/Phi2 over [l0, inf) diverges: strong ergodicity test function unavailable".into(),
        ));
    }
    let mut psi = assemble(g, c1, c2, modulus.l0)?;
    let c = 2.0 * modulus.l0;
    let (_, p1, p2) = psi.at_2l0;
    let q = -p2 * phi2.eval(c) / (p1 * phi2.d1(c));
    let mut delta = delta;
    let mut b = q * (delta + 1.0) - delta;
    let mut halvings = 0;
    while !(b > 0.0) {
        delta *= 0.5;
        b = q * (delta + 1.0) - delta;
        halvings += 1;
        if halvings > 200 {
            return Err(Error::Validation("could not find delta with B > 0".into()));
        }
    }
    let a = p1 * phi2.eval(c) / (delta + 1.0);
    psi.variant = PsiVariant::StrongErgodic { a, b, delta, phi2 };
    validate(&psi)?;
    Ok(psi)
}

use crate::error::{Error, Result};
use crate::model::Mass;

use super::log_grid;

/// One-sided modulus `Φ₁` of the drift on short distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi1 {
    Zero,
    /// `k r`
    Linear { k: f64 },
    /// `k r log(4 l / r)`
    LogRatio { k: f64, l: f64 },
    /// `b r log(1 + 1/r)`
    LogOnePlus { b: f64 },
}

impl Phi1 {
    pub fn is_zero(&self) -> bool {
        match *self {
            Phi1::Zero => true,
            Phi1::Linear { k } | Phi1::LogRatio { k, .. } => k == 0.0,
            Phi1::LogOnePlus { b } => b == 0.0,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match *self {
            Phi1::Zero => 0.0,
            Phi1::Linear { k } => k * r,
            Phi1::LogRatio { k, l } => k * r * (4.0 * l / r).ln(),
            Phi1::LogOnePlus { b } => b * r * (1.0 / r).ln_1p(),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        match *self {
            Phi1::Zero => 0.0,
            Phi1::Linear { k } => k,
            Phi1::LogRatio { k, l } => k * ((4.0 * l / r).ln() - 1.0),
            Phi1::LogOnePlus { b } => b * ((1.0 / r).ln_1p() - 1.0 / (1.0 + r)),
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        match *self {
            Phi1::Zero | Phi1::Linear { .. } => 0.0,
            Phi1::LogRatio { k, .. } => -k / r,
            Phi1::LogOnePlus { b } => -b / (r * (1.0 + r) * (1.0 + r)),
        }
    }

    pub fn d3(&self, r: f64) -> f64 {
        match *self {
            Phi1::Zero | Phi1::Linear { .. } => 0.0,
            Phi1::LogRatio { k, .. } => k / (r * r),
            Phi1::LogOnePlus { b } => b * (1.0 + 3.0 * r) / (r * r * (1.0 + r).powi(3)),
        }
    }

    /// Closed form of `∫_0^r Φ₁(z) z^{m-2} dz` for `m > 0`, when one exists.
    pub fn weighted_integral(&self, r: f64, m: f64) -> Option<f64> {
        if r <= 0.0 {
            return Some(0.0);
        }
        match *self {
            Phi1::Zero => Some(0.0),
            Phi1::Linear { k } => Some(k * r.powf(m) / m),
            Phi1::LogRatio { k, l } => Some(k * r.powf(m) / m * ((4.0 * l / r).ln() + 1.0 / m)),
            Phi1::LogOnePlus { .. } => None,
        }
    }
}

/// Dissipation modulus `Φ₂` on long distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi2 {
    /// `k r`
    Linear { k: f64 },
    /// `coef · r^p` with `p ≥ 1`
    Power { coef: f64, p: f64 },
}

impl Phi2 {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Phi2::Linear { k } => k * r,
            Phi2::Power { coef, p } => coef * r.powf(p),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        match *self {
            Phi2::Linear { k } => k,
            Phi2::Power { coef, p } => coef * p * r.powf(p - 1.0),
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        match *self {
            Phi2::Linear { .. } => 0.0,
            Phi2::Power { coef, p } => coef * p * (p - 1.0) * r.powf(p - 2.0),
        }
    }

    fn exponent(&self) -> f64 {
        match *self {
            Phi2::Linear { .. } => 1.0,
            Phi2::Power { p, .. } => p,
        }
    }

    fn coef(&self) -> f64 {
        match *self {
            Phi2::Linear { k } => k,
            Phi2::Power { coef, .. } => coef,
        }
    }

    /// `∫_a^b dv / Φ₂(v)` for `0 < a ≤ b ≤ ∞`.
    pub fn inverse_integral(&self, a: f64, b: f64) -> Mass {
        let (c, p) = (self.coef(), self.exponent());
        if p == 1.0 {
            return if b.is_infinite() { Mass::Infinite } else { Mass::Finite((b / a).ln() / c) };
        }
        if b.is_infinite() && p < 1.0 {
            return Mass::Infinite;
        }
        let pb = if b.is_infinite() { 0.0 } else { b.powf(1.0 - p) };
        Mass::Finite((a.powf(1.0 - p) - pb) / (c * (p - 1.0)))
    }

    /// `∫_{from}^∞ ds / Φ₂(s)`.
    pub fn tail_integral(&self, from: f64) -> Mass {
        self.inverse_integral(from, f64::INFINITY)
    }
}

/// The drift moduli and the distance threshold `l₀` separating them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftModulus {
    pub phi1: Phi1,
    pub phi2: Option<Phi2>,
    pub l0: f64,
    /// Linear dissipation rate beyond `l₀`.
    pub k2: Option<f64>,
}

impl DriftModulus {
    /// Validates the sign pattern of `Φ₁` on `(0, 2l₀]` (with `Φ₁′ ≥ 0`
    /// checked on `(0, l₀]`, where the drift bound uses it) and the
    /// monotonicity and convexity of `Φ₂` on `[l₀, ∞)`.
    pub fn new(phi1: Phi1, phi2: Option<Phi2>, l0: f64, k2: Option<f64>) -> Result<Self> {
        if !(l0 > 0.0 && l0.is_finite()) {
            return Err(Error::Domain(format!("l0 must be positive, got {l0}")));
        }
        if let Some(k) = k2 {
            if !(k > 0.0) {
                return Err(Error::Domain(format!("k2 must be positive, got {k}")));
            }
        }
        if phi2.is_none() && k2.is_none() {
            return Err(Error::Domain("either k2 or phi2 is required".into()));
        }
        let m = DriftModulus { phi1, phi2, l0, k2 };
        for r in log_grid(2.0 * l0 * 1e-8, 2.0 * l0, 2000) {
            let tol = 1e-12 * (1.0 + phi1.eval(r).abs());
            if phi1.eval(r) < -tol {
                return Err(Error::Validation(format!("Phi1({r}) < 0")));
            }
            if r <= l0 && phi1.d1(r) < -tol {
                return Err(Error::Validation(format!("Phi1'({r}) < 0")));
            }
            if phi1.d2(r) > tol / r {
                return Err(Error::Validation(format!("Phi1''({r}) > 0")));
            }
            if phi1.d3(r) < -tol / (r * r) {
                return Err(Error::Validation(format!("Phi1'''({r}) < 0")));
            }
        }
        if let Some(p2) = phi2 {
            if let Phi2::Power { coef, p } = p2 {
                if !(coef > 0.0 && p >= 1.0) {
                    return Err(Error::Validation(format!("Phi2 power needs coef > 0 and p >= 1, got {coef}, {p}")));
                }
            }
            if let Phi2::Linear { k } = p2 {
                if !(k > 0.0) {
                    return Err(Error::Validation(format!("Phi2 slope must be positive, got {k}")));
                }
            }
        }
        Ok(m)
    }

    /// Linear rate `k₂` with `−k₂ r` dominating the drift beyond `l₀`.
    /// Derived from `Φ₂` when not given: a convex `Φ₂` with `Φ₂(0) = 0`
    /// satisfies `Φ₂(r) ≥ (Φ₂(l₀)/l₀) r` for `r ≥ l₀`.
    pub fn k2(&self) -> f64 {
        match (self.k2, self.phi2) {
            (Some(k), _) => k,
            (None, Some(p)) => p.eval(self.l0) / self.l0,
            (None, None) => unreachable!("validated at construction"),
        }
    }

    /// `∫_{l₀}^∞ ds / Φ₂(s)`, infinite for linear dissipation.
    pub fn phi2_tail(&self) -> Mass {
        match self.phi2 {
            Some(p) => p.tail_integral(self.l0),
            None => Mass::Infinite,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, r: f64) -> f64 {
        let h = 1e-5 * r;
        (f(r + h) - f(r - h)) / (2.0 * h)
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        for phi in [Phi1::Linear { k: 2.0 }, Phi1::LogRatio { k: 1.5, l: 1.0 }, Phi1::LogOnePlus { b: 0.7 }] {
            for r in [0.01, 0.3, 1.0, 1.9] {
                assert!((fd(|x| phi.eval(x), r) - phi.d1(r)).abs() < 1e-7 * (1.0 + phi.d1(r).abs()));
                assert!((fd(|x| phi.d1(x), r) - phi.d2(r)).abs() < 1e-6 * (1.0 + phi.d2(r).abs()));
                assert!((fd(|x| phi.d2(x), r) - phi.d3(r)).abs() < 1e-6 * (1.0 + phi.d3(r).abs()));
            }
        }
    }

    #[test]
    fn weighted_integral_closed_forms() {
        let phi = Phi1::LogRatio { k: 1.0, l: 1.0 };
        let q = crate::quad::QuadratureSpec::default();
        let m = 0.5;
        let num = crate::quad::integrate(&|z: f64| phi.eval(z) * z.powf(m - 2.0), 0.0, 1.5, &q).unwrap().value;
        assert!((phi.weighted_integral(1.5, m).unwrap() - num).abs() < 1e-8);
    }

    #[test]
    fn phi2_tails() {
        assert!(Phi2::Linear { k: 1.0 }.tail_integral(1.0).is_infinite());
        let p = Phi2::Power { coef: 0.5, p: 2.0 };
        assert!((p.tail_integral(2.0).finite().unwrap() - 1.0).abs() < 1e-15);
        assert!((p.inverse_integral(2.0, 4.0).finite().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(DriftModulus::new(Phi1::Zero, None, 1.0, Some(1.0)).is_ok());
        assert!(DriftModulus::new(Phi1::Linear { k: -1.0 }, None, 1.0, Some(1.0)).is_err());
        assert!(DriftModulus::new(Phi1::Zero, None, 1.0, None).is_err());
        // Φ₁′ turns negative beyond 4l/e but is only required on (0, l₀]
        assert!(DriftModulus::new(Phi1::LogRatio { k: 1.0, l: 1.0 }, None, 1.0, Some(1.0)).is_ok());
        let m = DriftModulus::new(Phi1::Linear { k: 1.0 }, Some(Phi2::Power { coef: 0.5, p: 2.0 }), 2.0, None).unwrap();
        assert_eq!(m.k2(), 1.0);
    }
}

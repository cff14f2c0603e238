//! Two counterexamples: an infinite invariant measure for a degenerate
//! diffusion, and the unbounded mean hitting time of CIR.

use crate::error::{Error, Result};
use crate::model::Mass;
use crate::quad::{self, QuadratureSpec};
use crate::testfn::TestFn;

/// `∫_0^∞ Lf(x) x^{−2} e^{−x} dx` for `L = x² d²/dx² − x² d/dx`.
///
/// The weight cancels `x²`, leaving `∫(f″ − f′)e^{−x} = −f′(0)`, so the
/// residual vanishes for `f′(0) = 0`.
pub fn invariant_density_residual(f: &dyn TestFn, q: &QuadratureSpec) -> Result<f64> {
    let h = |x: f64| {
        if x == 0.0 {
            return f.d2(0.0) - f.d1(0.0);
        }
        let lf = x * x * f.d2(x) - x * x * f.d1(x);
        lf * x.powi(-2) * (-x).exp()
    };
    let head = quad::integrate(&h, 0.0, 1.0, q)?.value;
    let tail = quad::integrate_to_infinity(&h, 1.0, q)?.value;
    Ok(head + tail)
}

/// Lower bound `e^{−1}(1/ε − 1)` on the weight's mass over `(ε, 1)`.
pub fn invariant_mass_lower_bound(eps: f64) -> f64 {
    (-1f64).exp() * (1.0 / eps - 1.0)
}

/// `μ(ℝ₊)` for `μ(dx) = x^{−2}e^{−x}dx`: the partial masses over `(ε, ∞)`
/// grow without bound as `ε → 0`.
pub fn invariant_measure_mass() -> Mass {
    Mass::Infinite
}

/// `𝔼^x[τ₁]` for CIR with `γ₀ = d − bx` and `γ₁ = 2cx`:
/// `∫_0^∞ (e^{−z} − e^{−xz})/(bz + cz²) · ((b + cz)/b)^{d/c} dz`.
pub fn cir_expected_hitting_time(x: f64, b: f64, c: f64, d: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(b > 0.0 && c > 0.0 && d > 0.0) {
        return Err(Error::Domain("CIR hitting time needs b, c, d > 0".into()));
    }
    if !(x >= 1.0) {
        return Err(Error::Domain(format!("CIR hitting time of 1 needs x >= 1, got {x}")));
    }
    if x == 1.0 {
        return Ok(0.0);
    }
    let p = d / c;
    let h = |z: f64| {
        if z == 0.0 {
            return (x - 1.0) / b;
        }
        // (e^{−z} − e^{−xz}) without cancellation
        let num = (-z).exp() * -(-(x - 1.0) * z).exp_m1();
        num / (z * (b + c * z)) * (p * (c * z / b).ln_1p()).exp()
    };
    let head = quad::integrate(&h, 0.0, 1.0, q)?.value;
    let tail = quad::integrate_to_infinity(&h, 1.0, q)?.value;
    Ok(head + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::ClosureFn;

    #[test]
    fn residual_vanishes_for_flat_start() {
        let q = QuadratureSpec::default();
        let f = ClosureFn::new(
            |x: f64| (-x * x).exp(),
            |x: f64| -2.0 * x * (-x * x).exp(),
            |x: f64| (4.0 * x * x - 2.0) * (-x * x).exp(),
        );
        assert!(invariant_density_residual(&f, &q).unwrap().abs() <= 1e-6);
        let one = ClosureFn::new(|_| 1.0, |_| 0.0, |_| 0.0);
        assert_eq!(invariant_density_residual(&one, &q).unwrap(), 0.0);
        // f′(0) ≠ 0 leaves −f′(0)
        let lin = ClosureFn::new(|x: f64| 1.0 - (-x).exp(), |x: f64| (-x).exp(), |x: f64| -(-x).exp());
        assert!((invariant_density_residual(&lin, &q).unwrap() + 1.0).abs() < 1e-8);
        assert!(invariant_mass_lower_bound(1e-6) > 3e5);
        assert!(invariant_measure_mass().is_infinite());
    }

    #[test]
    fn hitting_time_reduces_to_log_for_unit_parameters() {
        // b = c = d = 1 gives Frullani's integral: ln x
        let q = QuadratureSpec::default();
        for x in [2.0, 10.0, 1e3, 1e6] {
            let v = cir_expected_hitting_time(x, 1.0, 1.0, 1.0, &q).unwrap();
            assert!((v - f64::ln(x)).abs() < 1e-7 * f64::ln(x), "x = {x}: {v}");
        }
        assert_eq!(cir_expected_hitting_time(1.0, 1.0, 1.0, 1.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn hitting_time_matches_scale_and_speed() {
        // 𝔼^x τ₁ = ∫_1^x s′(y) ∫_y^∞ m(u) du dy, s′ = y^{−d/c}e^{by/c}, m = u^{d/c−1}e^{−bu/c}/c
        let q = QuadratureSpec::default();
        let (b, c, d, x) = (0.7, 0.4, 1.3, 5.0);
        let p = d / c;
        let inner = |y: f64| {
            quad::integrate_to_infinity(&|u: f64| u.powf(p - 1.0) * (-(b / c) * (u - y)).exp() / c, y, &q)
                .unwrap()
                .value
        };
        let outer = quad::integrate(&|y: f64| y.powf(-p) * inner(y), 1.0, x, &q).unwrap().value;
        let v = cir_expected_hitting_time(x, b, c, d, &q).unwrap();
        assert!((v - outer).abs() < 1e-7 * outer, "{v} vs {outer}");
    }
}

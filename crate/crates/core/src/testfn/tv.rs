use super::{log_grid, PsiFunction, TestFn};
use crate::error::{Error, Result};

/// `f_n`: equal to `ψ` below `1/(n+1)`, to `1 + b(r/(1+r))^θ + ψ` from
/// `1/n` on, joined by a quintic smoothstep.
#[derive(Debug, Clone)]
pub struct TVTestFunction {
    pub psi: PsiFunction,
    pub b: f64,
    pub theta_tv: f64,
    pub n: u32,
    /// `c` with `c⁻¹(1+r) ≤ f_n(r) ≤ c(1+r)` on `[1/n, 100]`.
    pub envelope: f64,
}

/// Quintic smoothstep and its first two derivatives on `[0,1]`.
fn smoothstep(t: f64) -> (f64, f64, f64) {
    let t = t.clamp(0.0, 1.0);
    let t2 = t * t;
    (
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    )
}

impl TVTestFunction {
    fn lo(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    fn hi(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `E(r) = 1 + b (r/(1+r))^θ` and its first two derivatives.
    fn envelope_term(&self, r: f64) -> (f64, f64, f64) {
        let (b, t) = (self.b, self.theta_tv);
        let u = r / (1.0 + r);
        let u1 = 1.0 / ((1.0 + r) * (1.0 + r));
        let u2 = -2.0 * u1 / (1.0 + r);
        (
            1.0 + b * u.powf(t),
            b * t * u.powf(t - 1.0) * u1,
            b * t * ((t - 1.0) * u.powf(t - 2.0) * u1 * u1 + u.powf(t - 1.0) * u2),
        )
    }

    /// `(S, S′, S″)` of the bridge as a function of `r`.
    fn bridge(&self, r: f64) -> (f64, f64, f64) {
        let (lo, hi) = (self.lo(), self.hi());
        if r <= lo {
            return (0.0, 0.0, 0.0);
        }
        if r >= hi {
            return (1.0, 0.0, 0.0);
        }
        let w = hi - lo;
        let (s, s1, s2) = smoothstep((r - lo) / w);
        (s, s1 / w, s2 / (w * w))
    }

    /// `f_n(r) / (1 + r)` range on `[1/n, 100]`.
    fn envelope_constant(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for r in log_grid(self.hi(), 100.0, 2000) {
            let q = self.value(r) / (1.0 + r);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        hi.max(1.0 / lo)
    }
}

impl TestFn for TVTestFunction {
    fn value(&self, r: f64) -> f64 {
        let p = self.psi.value(r);
        if r <= self.lo() {
            return p;
        }
        let (s, _, _) = self.bridge(r);
        p + s * self.envelope_term(r).0
    }

    fn d1(&self, r: f64) -> f64 {
        let p = self.psi.d1(r);
        if r <= self.lo() {
            return p;
        }
        let (s, s1, _) = self.bridge(r);
        let (e, e1, _) = self.envelope_term(r);
        p + s1 * e + s * e1
    }

    fn d2(&self, r: f64) -> f64 {
        let p = self.psi.d2(r);
        if r <= self.lo() {
            return p;
        }
        let (s, s1, s2) = self.bridge(r);
        let (e, e1, e2) = self.envelope_term(r);
        p + s2 * e + 2.0 * s1 * e1 + s * e2
    }
}

/// `b = e^{−c₂ g(l₀)}/2` and `θ = (α−β)/2`. Pass `α = 2` for the
/// diffusion case, which gives `θ = (2−β)/2`.
pub fn build_tv_fn(psi: PsiFunction, alpha: f64, beta: f64, n: u32) -> Result<TVTestFunction> {
    if !(0.0 < beta && beta < alpha && alpha <= 2.0) {
        return Err(Error::Domain(format!("need 0 < beta < alpha <= 2, got alpha = {alpha}, beta = {beta}")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let b = 0.5 * (-psi.c2 * psi.g.value(psi.l0)).exp();
    let mut f = TVTestFunction { psi, b, theta_tv: 0.5 * (alpha - beta), n, envelope: 0.0 };
    f.envelope = f.envelope_constant();
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::{build_g, build_psi, DriftModulus, Phi1};

    fn tv(n: u32) -> TVTestFunction {
        let m = DriftModulus::new(Phi1::Zero, None, 1.0, Some(1.0)).unwrap();
        let g = build_g(&m, 0.5, 1.0).unwrap();
        let c2 = 0.5f64.sqrt();
        let psi = build_psi(g, (-c2).exp(), c2, 1.0).unwrap();
        build_tv_fn(psi, 1.5, 1.0, n).unwrap()
    }

    #[test]
    fn pieces_and_bridge() {
        let f = tv(4);
        assert!((f.b - 0.5 * (-0.5f64.sqrt()).exp()).abs() < 1e-15);
        assert_eq!(f.theta_tv, 0.25);
        for r in [1e-3, 0.1, 0.2] {
            assert_eq!(f.value(r), f.psi.value(r));
        }
        for r in [0.25f64, 1.0, 30.0] {
            let exact = 1.0 + f.b * (r / (1.0 + r)).powf(0.25) + f.psi.value(r);
            assert_eq!(f.value(r), exact);
        }
        // monotone through the bridge, C² at both ends
        let grid: Vec<f64> = (0..=200).map(|i| 0.2 + 0.05 * i as f64 / 200.0).collect();
        assert!(grid.windows(2).all(|w| f.value(w[1]) > f.value(w[0])));
        for end in [0.2, 0.25] {
            let h = 1e-9;
            assert!((f.value(end + h) - f.value(end - h)).abs() < 1e-6);
            assert!((f.d1(end + h) - f.d1(end - h)).abs() < 1e-5);
            assert!((f.d2(end + h) - f.d2(end - h)).abs() < 1e-3);
        }
        assert!(f.envelope >= 1.0 && f.envelope.is_finite());
    }

    #[test]
    fn rejects_bad_exponents() {
        let f = tv(1);
        assert!(build_tv_fn(f.psi.clone(), 1.0, 1.0, 1).is_err());
        assert!(build_tv_fn(f.psi, 1.5, 1.0, 0).is_err());
    }
}

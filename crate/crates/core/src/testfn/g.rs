use std::sync::Arc;

use super::{log_grid, CumulativeCache, DriftModulus, Phi1};
use crate::error::{Error, Result};
use crate::quad::{self, QuadratureSpec};

/// `g(r) = r^θ + c₀ ∫_0^r Φ₁(z) z^{θ-2} dz` on `[0, 2l₀]`.
#[derive(Debug, Clone)]
pub struct GFunction {
    pub theta: f64,
    pub c0g: f64,
    pub phi1: Phi1,
    pub l0: f64,
    cache: Option<Arc<CumulativeCache>>,
    /// `sup_{0<r≤2l₀} −r g″(r)/g′(r)`
    pub sup_neg_rg2_over_g1: f64,
    /// `sup_{0<r≤2l₀} r g′(r)`
    pub sup_rg1: f64,
    /// `sup_{0<r≤2l₀} (r g′(r) − r g″(r)/g′(r))`
    pub sup_combined: f64,
}

/// Number of log-spaced points used for suprema over `(0, 2l₀]`.
pub const SUP_GRID: usize = 10_000;

pub fn build_g(modulus: &DriftModulus, theta: f64, c0g: f64) -> Result<GFunction> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!("theta must lie in (0,1], got {theta}")));
    }
    if !(c0g >= 0.0 && c0g.is_finite()) {
        return Err(Error::Domain(format!("c0 weight must be non-negative, got {c0g}")));
    }
    let phi1 = modulus.phi1;
    let l0 = modulus.l0;
    let upper = 2.0 * l0;
    let cache = if phi1.weighted_integral(upper, theta).is_some() || phi1.is_zero() {
        None
    } else {
        let h = move |z: f64| phi1.eval(z) * z.powf(theta - 2.0);
        let c = CumulativeCache::build(&h, upper, &QuadratureSpec::default()).map_err(|_| {
            Error::Precondition(format!(
                "integral of Phi1(z) z^(theta-2) over (0, {upper}] diverges for theta = {theta}"
            ))
        })?;
        if !c.total().is_finite() {
            return Err(Error::Precondition(format!(
                "integral of Phi1(z) z^(theta-2) over (0, {upper}] is not finite"
            )));
        }
        Some(Arc::new(c))
    };
    let mut g = GFunction {
        theta,
        c0g,
        phi1,
        l0,
        cache,
        sup_neg_rg2_over_g1: 0.0,
        sup_rg1: 0.0,
        sup_combined: 0.0,
    };

    let (mut s1, mut s2, mut s3) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in log_grid(upper * 1e-10, upper, SUP_GRID) {
        let (g1, g2, g3) = (g.d1(r), g.d2(r), g.d3(r));
        let scale = g1.abs() / r;
        if !(g1 >= 0.0) {
            return Err(Error::Validation(format!("g'({r}) = {g1} < 0")));
        }
        if g2 > 1e-10 * scale {
            return Err(Error::Validation(format!("g''({r}) = {g2} > 0")));
        }
        if g3 < -1e-10 * scale / r {
            return Err(Error::Validation(format!("g'''({r}) = {g3} < 0")));
        }
        let ratio = -r * g2 / g1;
        s1 = s1.max(ratio);
        s2 = s2.max(r * g1);
        s3 = s3.max(r * g1 + ratio);
    }
    g.sup_neg_rg2_over_g1 = s1.max(0.0);
    g.sup_rg1 = s2;
    g.sup_combined = s3;
    Ok(g)
}

impl GFunction {
    #[inline]
    fn h(&self, z: f64) -> f64 {
        self.phi1.eval(z) * z.powf(self.theta - 2.0)
    }

    /// `∫_0^r Φ₁(z) z^{θ-2} dz`
    pub fn moment_integral(&self, r: f64) -> f64 {
        if r <= 0.0 || self.phi1.is_zero() {
            return 0.0;
        }
        if let Some(v) = self.phi1.weighted_integral(r, self.theta) {
            return v;
        }
        match &self.cache {
            Some(c) => c.eval(&|z| self.h(z), r),
            None => quad::integrate(&|z| self.h(z), 0.0, r, &QuadratureSpec::default()).map_or(f64::NAN, |v| v.value),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        r.powf(self.theta) + self.c0g * self.moment_integral(r)
    }

    pub fn d1(&self, r: f64) -> f64 {
        let t = self.theta;
        t * r.powf(t - 1.0) + self.c0g * self.phi1.eval(r) * r.powf(t - 2.0)
    }

    pub fn d2(&self, r: f64) -> f64 {
        let t = self.theta;
        let p = &self.phi1;
        t * (t - 1.0) * r.powf(t - 2.0)
            + self.c0g * (p.d1(r) * r.powf(t - 2.0) + (t - 2.0) * p.eval(r) * r.powf(t - 3.0))
    }

    pub fn d3(&self, r: f64) -> f64 {
        let t = self.theta;
        let p = &self.phi1;
        t * (t - 1.0) * (t - 2.0) * r.powf(t - 3.0)
            + self.c0g
                * (p.d2(r) * r.powf(t - 2.0)
                    + 2.0 * (t - 2.0) * p.d1(r) * r.powf(t - 3.0)
                    + (t - 2.0) * (t - 3.0) * p.eval(r) * r.powf(t - 4.0))
    }
}

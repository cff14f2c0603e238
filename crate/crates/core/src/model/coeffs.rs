use std::fmt;
use std::sync::Arc;

use super::RealFn;
use crate::error::{Error, Result};

/// Reading of the CIR diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CirDiffusion {
    /// `γ₁(x) = √(2c)·x`, as the coefficient is written in the source.
    Literal,
    /// `γ₁(x) = 2c·x`, the textbook square-root diffusion `σ²x` with `σ² = 2c`.
    Conventional,
}

/// The coefficient triple `(γ₀, γ₁, γ₂)`: drift, diffusion variance and the
/// branching-rate multiplier of the jump noise.
///
/// Construction validates the structural conditions on a grid: `γ₀(0) ≥ 0`,
/// `γ₁(0) = 0`, `γ₁ ≥ 0`, `γ₂(0) = 0`, `γ₂ ≥ 0` and non-decreasing.
#[derive(Clone)]
pub struct CoefficientSet {
    name: String,
    drift: RealFn,
    diffusion: RealFn,
    branching: RealFn,
    pub gamma2_nondecreasing: bool,
    pub gamma1_vanishes_at_zero: bool,
    pub gamma2_vanishes_at_zero: bool,
    diffusion_is_zero: bool,
    branching_is_zero: bool,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet").field("name", &self.name).finish_non_exhaustive()
    }
}

const SLACK: f64 = 1e-12;

/// Validation grid: the origin plus log-spaced points on `[1e-8, 1e2]`.
pub(crate) fn validation_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    let n = 400;
    for i in 0..=n {
        g.push(10f64.powf(-8.0 + 10.0 * i as f64 / n as f64));
    }
    g
}

impl CoefficientSet {
    pub fn new(name: impl Into<String>, drift: RealFn, diffusion: RealFn, branching: RealFn) -> Result<Self> {
        let name = name.into();
        let grid = validation_grid();
        let bad = |what: String| Err(Error::Validation(format!("coefficients `{name}`: {what}")));

        for &x in &grid {
            let (g0, g1, g2) = (drift(x), diffusion(x), branching(x));
            if !(g0.is_finite() && g1.is_finite() && g2.is_finite()) {
                return bad(format!("non-finite coefficient at x = {x}"));
            }
            if x > 0.0 && g1 < -SLACK {
                return bad(format!("gamma1({x}) = {g1} < 0"));
            }
            if g2 < -SLACK {
                return bad(format!("gamma2({x}) = {g2} < 0"));
            }
        }
        if drift(0.0) < -SLACK {
            return bad(format!("gamma0(0) = {} < 0", drift(0.0)));
        }
        let gamma1_vanishes_at_zero = diffusion(0.0).abs() <= SLACK;
        if !gamma1_vanishes_at_zero {
            return bad(format!("gamma1(0) = {} != 0", diffusion(0.0)));
        }
        let gamma2_vanishes_at_zero = branching(0.0).abs() <= SLACK;
        if !gamma2_vanishes_at_zero {
            return bad(format!("gamma2(0) = {} != 0", branching(0.0)));
        }
        let gamma2_nondecreasing = grid.windows(2).all(|w| {
            let (a, b) = (branching(w[0]), branching(w[1]));
            b >= a - SLACK * (1.0 + a.abs())
        });
        if !gamma2_nondecreasing {
            return bad("gamma2 is not non-decreasing on the validation grid".into());
        }
        let diffusion_is_zero = grid.iter().all(|&x| diffusion(x) == 0.0);
        let branching_is_zero = grid.iter().all(|&x| branching(x) == 0.0);
        Ok(CoefficientSet {
            name,
            drift,
            diffusion,
            branching,
            gamma2_nondecreasing,
            gamma1_vanishes_at_zero,
            gamma2_vanishes_at_zero,
            diffusion_is_zero,
            branching_is_zero,
        })
    }

    /// CIR: `γ₀ = d − b x`, `γ₂ = 0`, diffusion per `reading`.
    pub fn cir(b: f64, c: f64, d: f64, reading: CirDiffusion) -> Result<Self> {
        if !(b > 0.0 && c > 0.0 && d > 0.0) {
            return Err(Error::Domain("cir requires b, c, d > 0".into()));
        }
        let k = match reading {
            CirDiffusion::Literal => (2.0 * c).sqrt(),
            CirDiffusion::Conventional => 2.0 * c,
        };
        Self::new(
            "cir",
            Arc::new(move |x| d - b * x),
            Arc::new(move |x| k * x.max(0.0)),
            Arc::new(|_| 0.0),
        )
    }

    /// Logistic branching: `γ₀ = b₁x − b₂x²`, `γ₁ = c₁x`, `γ₂ = c₂x`.
    pub fn logistic(b1: f64, b2: f64, c1: f64, c2: f64) -> Result<Self> {
        Self::generalized_logistic(b1, b2, 2.0, c1, c2).map(|c| c.renamed("logistic"))
    }

    /// `γ₀ = b₁x − b₂x^δ` with `δ > 1`, `γ₁ = c₁x`, `γ₂ = c₂x`.
    pub fn generalized_logistic(b1: f64, b2: f64, delta: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(b2 > 0.0 && delta > 1.0 && c1 >= 0.0 && c2 >= 0.0) {
            return Err(Error::Domain("generalized logistic requires b2 > 0, delta > 1, c1, c2 >= 0".into()));
        }
        Self::new(
            "generalized_logistic",
            Arc::new(move |x| b1 * x - b2 * x.max(0.0).powf(delta)),
            Arc::new(move |x| c1 * x.max(0.0)),
            Arc::new(move |x| c2 * x.max(0.0)),
        )
    }

    /// Classical branching with immigration: `γ₀ = a − b x`, `γ₁ = c₁x`, `γ₂ = c₂x`.
    pub fn csbp(a: f64, b: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(a >= 0.0 && c1 >= 0.0 && c2 >= 0.0) {
            return Err(Error::Domain("csbp requires a, c1, c2 >= 0".into()));
        }
        Self::new(
            "csbp",
            Arc::new(move |x| a - b * x),
            Arc::new(move |x| c1 * x.max(0.0)),
            Arc::new(move |x| c2 * x.max(0.0)),
        )
    }

    /// `γ₀ = b₁ x log(1 + 1/x) − b₂ x`, `γ₁ = c₁x`, `γ₂ = c₂x`.
    pub fn log_drift(b1: f64, b2: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(b1 > 0.0 && b2 > 0.0) {
            return Err(Error::Domain("log drift requires b1, b2 > 0".into()));
        }
        Self::new(
            "log_drift",
            Arc::new(move |x| if x > 0.0 { b1 * x * (1.0 / x).ln_1p() - b2 * x } else { 0.0 }),
            Arc::new(move |x| c1 * x.max(0.0)),
            Arc::new(move |x| c2 * x.max(0.0)),
        )
    }

    /// `γ₀ = b₁x − b₂(e^{c x^δ} − 1)`, `γ₁ = c₁x`, `γ₂ = c₂x`.
    ///
    /// The `−1` keeps `γ₀(0) = 0`; differences `γ₀(x) − γ₀(y)` are unaffected.
    pub fn exp_drift(b1: f64, b2: f64, c: f64, delta: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(b2 > 0.0 && c > 0.0 && delta > 0.0) {
            return Err(Error::Domain("exp drift requires b2, c, delta > 0".into()));
        }
        Self::new(
            "exp_drift",
            Arc::new(move |x| b1 * x - b2 * (c * x.max(0.0).powf(delta)).exp_m1()),
            Arc::new(move |x| c1 * x.max(0.0)),
            Arc::new(move |x| c2 * x.max(0.0)),
        )
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn gamma0(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    #[inline]
    pub fn gamma1(&self, x: f64) -> f64 {
        (self.diffusion)(x).max(0.0)
    }

    #[inline]
    pub fn sqrt_gamma1(&self, x: f64) -> f64 {
        self.gamma1(x).sqrt()
    }

    #[inline]
    pub fn gamma2(&self, x: f64) -> f64 {
        (self.branching)(x).max(0.0)
    }

    pub fn diffusion_is_zero(&self) -> bool {
        self.diffusion_is_zero
    }

    pub fn branching_is_zero(&self) -> bool {
        self.branching_is_zero
    }
}

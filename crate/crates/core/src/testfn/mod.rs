//! Test functions `g`, `ψ`, `f_n` and the contraction constants built from them.

mod constants;
mod g;
mod modulus;
mod psi;
mod tv;

use std::sync::Arc;

use crate::error::Result;
use crate::quad::{self, kronrod21, QuadratureSpec};

pub use constants::{derive_constants, ContractionConstants, JumpRoute, TheoremCase};
pub use g::{build_g, GFunction};
pub use modulus::{DriftModulus, Phi1, Phi2};
pub use psi::{build_psi, build_strong_psi, PsiFunction, PsiVariant};
pub use tv::{build_tv_fn, TVTestFunction};

/// A real function of the distance `r ≥ 0` with derivatives up to third order.
pub trait TestFn: Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;
    /// Third derivative; defaults to a central difference of `d2`.
    fn d3(&self, r: f64) -> f64 {
        let h = 1e-5 * r.abs().max(1e-3);
        (self.d2(r + h) - self.d2(r - h)) / (2.0 * h)
    }
}

/// A test function assembled from closures, mainly for ad-hoc checks.
#[derive(Clone)]
pub struct ClosureFn {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub f1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub f2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ClosureFn {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ClosureFn { f: Arc::new(f), f1: Arc::new(f1), f2: Arc::new(f2) }
    }

    /// The identity `f(r) = r`.
    pub fn identity() -> Self {
        Self::new(|r| r, |_| 1.0, |_| 0.0)
    }
}

impl TestFn for ClosureFn {
    fn value(&self, r: f64) -> f64 {
        (self.f)(r)
    }
    fn d1(&self, r: f64) -> f64 {
        (self.f1)(r)
    }
    fn d2(&self, r: f64) -> f64 {
        (self.f2)(r)
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// CSV table `r,psi,psi1,psi2` of a test function over a grid.
pub fn table_csv(f: &dyn TestFn, grid: &[f64]) -> String {
    let mut out = String::from("r,psi,psi1,psi2\n");
    for &r in grid {
        out.push_str(&format!("{r},{},{},{}\n", f.value(r), f.d1(r), f.d2(r)));
    }
    out
}

/// Running integral `∫_0^r h` from cumulative values at log-spaced nodes,
/// completed by a single 21-point Kronrod rule from the nearest node below.
#[derive(Debug, Clone)]
pub(crate) struct CumulativeCache {
    nodes: Vec<f64>,
    cum: Vec<f64>,
}

const NODES_PER_DECADE: usize = 20;
const CACHE_DECADES: usize = 14;

impl CumulativeCache {
    pub(crate) fn build<F: Fn(f64) -> f64 + ?Sized>(h: &F, upper: f64, q: &QuadratureSpec) -> Result<Self> {
        let n = NODES_PER_DECADE * CACHE_DECADES;
        let nodes = log_grid(upper * 10f64.powi(-(CACHE_DECADES as i32)), upper, n + 1);
        let mut cum = Vec::with_capacity(nodes.len());
        cum.push(quad::integrate(h, 0.0, nodes[0], q)?.value);
        for w in nodes.windows(2) {
            let prev = *cum.last().unwrap();
            cum.push(prev + quad::integrate(h, w[0], w[1], q)?.value);
        }
        Ok(CumulativeCache { nodes, cum })
    }

    pub(crate) fn upper(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub(crate) fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub(crate) fn eval<F: Fn(f64) -> f64 + ?Sized>(&self, h: &F, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r < self.nodes[0] {
            return quad::integrate(h, 0.0, r, &QuadratureSpec::default()).map_or(f64::NAN, |v| v.value);
        }
        let j = self.nodes.partition_point(|&x| x <= r) - 1;
        if j == self.nodes.len() - 1 && r > self.upper() {
            let extra = quad::integrate(h, self.upper(), r, &QuadratureSpec::default()).map_or(f64::NAN, |v| v.value);
            return self.total() + extra;
        }
        self.cum[j] + kronrod21(h, self.nodes[j], r).0
    }
}

//! Adaptive Gauss–Kronrod quadrature.
//!
//! The 21-point Kronrod rule with its embedded 10-point Gauss rule drives a
//! globally adaptive bisection (largest error first). Integrals starting at
//! the origin go through `z = b e^{-s}`, so algebraic singularities like
//! `z^{-0.9}` become exponentially decaying tails.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_535_868,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and limits for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Relative radius below which a semi-infinite range starting at the
    /// origin is no longer split geometrically.
    pub origin_radius: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            origin_radius: 1e-8,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Domain("quadrature tolerances must be positive".into()));
        }
        if !(self.origin_radius > 0.0 && self.origin_radius < 1.0) {
            return Err(Error::Domain("origin radius must lie in (0,1)".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self, estimate: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * estimate.abs())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

/// Fixed 21-point Kronrod rule on `[a, b]`; returns (kronrod, |kronrod - gauss|).
pub fn kronrod21<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let s = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate `f` over the union of consecutive intervals given by `points`
/// (sorted, at least two entries), refining globally until the total error
/// meets the spec.
pub fn integrate_points<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if points.len() < 2 {
        return Ok(Integral { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    let mut heap = BinaryHeap::with_capacity(points.len() * 4);
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (value, error) = kronrod21(f, a, b);
        total += value;
        total_err += error;
        heap.push(Piece { a, b, value, error });
    }
    let mut subdivisions = heap.len();
    while total_err > spec.tolerance(total) {
        if !total.is_finite() || subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution; accept what we have
            heap.push(Piece { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = kronrod21(f, worst.a, mid);
        let (v2, e2) = kronrod21(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
        subdivisions += 1;
    }
    // recompute sums to shed accumulated cancellation in the running totals
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(Integral { value, error, subdivisions })
}

/// Breakpoints `b * 2^{-k}` from `b` down to `b * radius`, plus the origin,
/// in increasing order.
pub fn origin_breakpoints(b: f64, radius: f64) -> Vec<f64> {
    let mut pts = vec![b];
    let stop = b * radius;
    let mut x = b;
    while x > stop {
        x *= 0.5;
        pts.push(x);
    }
    pts.push(0.0);
    pts.reverse();
    pts
}

/// Integrate over `[a, b]`. When `a == 0` the interval is pre-split
/// geometrically towards the origin.
pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if b == a {
        return Ok(Integral { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    if b < a {
        let r = integrate(f, b, a, spec)?;
        return Ok(Integral { value: -r.value, ..r });
    }
    if a == 0.0 {
        // z = b e^{-s} turns z^{-β} into the smooth decaying e^{-(1-β)s}
        const S_MAX: f64 = 230.0;
        let g = |s: f64| {
            if s > S_MAX {
                return 0.0;
            }
            let z = b * (-s).exp();
            f(z) * z
        };
        let r = integrate_to_infinity(&g, 0.0, spec)?;
        // whatever lives below z = b e^{-S_MAX} must be negligible
        let edge = g(S_MAX).abs();
        if !(edge <= spec.tolerance(r.value)) {
            return Err(Error::Quadrature { estimate: r.value, error: edge, subdivisions: r.subdivisions });
        }
        Ok(r)
    } else {
        integrate_points(f, &[a, b], spec)
    }
}

/// Integrate over `[a, ∞)` through the substitution `z = a + t/(1-t)`,
/// splitting `t` geometrically towards both ends.
pub fn integrate_to_infinity<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    let g = |t: f64| {
        let s = 1.0 - t;
        let v = f(a + t / s);
        if v == 0.0 {
            0.0
        } else {
            v / (s * s)
        }
    };
    let mut pts = Vec::new();
    // geometric towards t = 0 when a == 0, since integrands there are often singular
    if a == 0.0 {
        pts.extend(origin_breakpoints(0.5, spec.origin_radius));
    } else {
        pts.extend([0.0, 0.5]);
    }
    let mut t = 0.5;
    while 1.0 - t > 1e-12 {
        t = 1.0 - 0.5 * (1.0 - t);
        pts.push(t);
    }
    integrate_points(&g, &pts, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_polynomials() {
        let (v, _) = kronrod21(&|x: f64| x.powi(20) + 3.0 * x.powi(7) - 1.0, -1.0, 1.0);
        assert!((v - (2.0 / 21.0 - 2.0)).abs() < 1e-14);
        let sum: f64 = WGK[..10].iter().sum::<f64>() * 2.0 + WGK[10];
        assert!((sum - 2.0).abs() < 1e-14);
        let gsum: f64 = WG.iter().sum::<f64>() * 2.0;
        assert!((gsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn origin_singularity_converges() {
        let spec = QuadratureSpec::default();
        let r = integrate(&|z: f64| z.powf(-0.5), 0.0, 1.0, &spec).unwrap();
        assert!((r.value - 2.0).abs() < 2e-8, "{r:?}");
        let r = integrate(&|z: f64| z.powf(-0.9), 0.0, 4.0, &spec).unwrap();
        assert!((r.value - 10.0 * 4f64.powf(0.1)).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn semi_infinite() {
        let spec = QuadratureSpec::default();
        let r = integrate_to_infinity(&|z: f64| (-z).exp(), 0.0, &spec).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        let r = integrate_to_infinity(&|z: f64| 1.0 / (z * z), 1.0, &spec).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let spec = QuadratureSpec::default();
        let r = integrate(&|z: f64| z, 2.0, 1.0, &spec).unwrap();
        assert!((r.value + 1.5).abs() < 1e-14);
    }

    #[test]
    fn divergent_integral_reports_error() {
        let spec = QuadratureSpec { max_subdivisions: 200, ..Default::default() };
        let r = integrate_points(&|z: f64| 1.0 / z, &[0.0, 1.0], &spec);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
        let r = integrate(&|z: f64| z.powf(-1.5), 0.0, 1.0, &QuadratureSpec::default());
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}

//! Integration against `ν` and its overlap measures.

use crate::error::Result;
use crate::model::LevyMeasure;
use crate::quad::{self, QuadratureSpec};
use crate::testfn::TestFn;

/// `∫ h(z) dz` over the support of the absolutely continuous part of `ν`;
/// `h` must already include the density factor. `extra` adds breakpoints.
pub(crate) fn integrate_density(
    h: &dyn Fn(f64) -> f64,
    nu: &LevyMeasure,
    extra: &[f64],
    q: &QuadratureSpec,
) -> Result<f64> {
    if !nu.has_density() {
        return Ok(0.0);
    }
    let upper = nu.density_upper();
    let mut pts: Vec<f64> = nu
        .densities()
        .iter()
        .map(|(_, d)| d.upper())
        .chain(extra.iter().copied())
        .filter(|p| p.is_finite() && *p > 0.0 && *p < upper)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let first = pts.first().copied().unwrap_or(if upper.is_finite() { upper } else { 1.0 });
    let mut total = quad::integrate(h, 0.0, first, q)?.value;
    let mut rest = vec![first];
    rest.extend(pts.iter().copied().filter(|&p| p > first));
    if upper.is_finite() {
        if upper > *rest.last().unwrap() {
            rest.push(upper);
        }
        total += quad::integrate_points(h, &rest, q)?.value;
    } else {
        total += quad::integrate_points(h, &rest, q)?.value;
        total += quad::integrate_to_infinity(h, *rest.last().unwrap(), q)?.value;
    }
    Ok(total)
}

/// Below this jump size the increment is replaced by its Taylor expansion.
pub(crate) fn taylor_radius(base: f64) -> f64 {
    1e-4 * if base > 0.0 { base.min(1.0) } else { 1.0 }
}

/// `∫ (f(b+z) − f(b) − f′(b) z) ν(dz)`, with the density part split at
/// `split` when given.
pub(crate) fn compensated_jump_integral(
    f: &dyn TestFn,
    base: f64,
    nu: &LevyMeasure,
    split: Option<f64>,
    q: &QuadratureSpec,
) -> Result<f64> {
    if nu.is_zero() {
        return Ok(0.0);
    }
    let (f0, f1, f2) = (f.value(base), f.d1(base), f.d2(base));
    let f3 = f.d3(base);
    let f3 = if f3.is_finite() { f3 } else { 0.0 };
    let zeta = taylor_radius(base);
    let inc = |z: f64| {
        if z < zeta {
            z * z * (0.5 * f2 + f3 * z / 6.0)
        } else {
            f.value(base + z) - f0 - f1 * z
        }
    };
    let h = |z: f64| {
        let n = nu.density(z);
        if n == 0.0 {
            0.0
        } else {
            inc(z) * n
        }
    };
    let extra: Vec<f64> = split.into_iter().collect();
    let mut total = integrate_density(&h, nu, &extra, q)?;
    for a in nu.atoms() {
        total += a.mass * inc(a.location);
    }
    Ok(total)
}

use super::jumps::{compensated_jump_integral, integrate_density, taylor_radius};
use crate::error::{Error, Result};
use crate::model::{CoefficientSet, LevyMeasure, Mass};
use crate::quad::QuadratureSpec;
use crate::testfn::TestFn;

/// `Lf(x) = γ₀f′ + ½γ₁f″ + γ₂ ∫(f(x+z) − f(x) − zf′(x)) ν(dz)`.
pub fn apply_l(f: &dyn TestFn, x: f64, coeffs: &CoefficientSet, nu: &LevyMeasure, q: &QuadratureSpec) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("generator needs x >= 0, got {x}")));
    }
    let mut v = coeffs.gamma0(x) * f.d1(x) + 0.5 * coeffs.gamma1(x) * f.d2(x);
    let g2 = coeffs.gamma2(x);
    if g2 > 0.0 && !nu.is_zero() {
        v += g2 * compensated_jump_integral(f, x, nu, None, q)?;
    }
    Ok(v)
}

/// Which non-local coupling the difference operator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    /// Refined basic coupling: the `μ_{±r_κ}` bracket is present.
    Refined,
    /// Common jumps only.
    Synchronous,
}

fn ordered(x: f64, y: f64) -> Result<f64> {
    if !(x > y && y >= 0.0) {
        return Err(Error::Domain(format!("coupling operator needs x > y >= 0, got x = {x}, y = {y}")));
    }
    Ok(x - y)
}

/// Difference-process generator with the jump integral split at `split`
/// (the proof uses `c₀ r`).
pub fn coupling_l_split(
    f: &dyn TestFn,
    x: f64,
    y: f64,
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    kappa: f64,
    kind: CouplingKind,
    split: Option<f64>,
    q: &QuadratureSpec,
) -> Result<f64> {
    let r = ordered(x, y)?;
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let f1 = f.d1(r);
    let drift = (coeffs.gamma0(x) - coeffs.gamma0(y)) * f1;
    // concave f with no noise: only the drift transports
    if coeffs.diffusion_is_zero() && coeffs.branching_is_zero() {
        return Ok(drift);
    }
    let s = coeffs.sqrt_gamma1(x) + coeffs.sqrt_gamma1(y);
    let mut v = drift + 0.5 * s * s * f.d2(r);
    if nu.is_zero() {
        return Ok(v);
    }
    let (g2x, g2y) = (coeffs.gamma2(x), coeffs.gamma2(y));
    if kind == CouplingKind::Refined && g2y > 0.0 {
        let a = r.min(kappa);
        let mass = match nu.overlap_mass(a)? {
            Mass::Finite(m) => m,
            Mass::Infinite => return Err(Error::Domain("overlap mass is infinite at zero shift".into())),
        };
        if mass > 0.0 {
            v += 0.5 * g2y * (f.value(r + a) + f.value(r - a) - 2.0 * f.value(r)) * mass;
        }
    }
    let d = g2x - g2y;
    if d != 0.0 {
        v += d * compensated_jump_integral(f, r, nu, split, q)?;
    }
    Ok(v)
}

/// `L̃f(x−y)` for the refined basic coupling, jump integral split at `r`.
pub fn apply_coupling_l(
    f: &dyn TestFn,
    x: f64,
    y: f64,
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    kappa: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    let split = Some(x - y);
    coupling_l_split(f, x, y, coeffs, nu, kappa, CouplingKind::Refined, split, q)
}

/// `L*f(x−y)`: the same with synchronous jumps.
pub fn apply_synchronous_l(
    f: &dyn TestFn,
    x: f64,
    y: f64,
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    q: &QuadratureSpec,
) -> Result<f64> {
    let split = Some(x - y);
    coupling_l_split(f, x, y, coeffs, nu, 1.0, CouplingKind::Synchronous, split, q)
}

/// A function of two variables with derivatives up to second order.
pub trait Bivariate: Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn dx(&self, x: f64, y: f64) -> f64;
    fn dy(&self, x: f64, y: f64) -> f64;
    fn dxx(&self, x: f64, y: f64) -> f64;
    fn dyy(&self, x: f64, y: f64) -> f64;
    fn dxy(&self, x: f64, y: f64) -> f64;
}

/// `h(x, y) = f(x) + g(y)`.
pub struct SumFn<'a> {
    pub f: &'a dyn TestFn,
    pub g: &'a dyn TestFn,
}

impl Bivariate for SumFn<'_> {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.f.value(x) + self.g.value(y)
    }
    fn dx(&self, x: f64, _: f64) -> f64 {
        self.f.d1(x)
    }
    fn dy(&self, _: f64, y: f64) -> f64 {
        self.g.d1(y)
    }
    fn dxx(&self, x: f64, _: f64) -> f64 {
        self.f.d2(x)
    }
    fn dyy(&self, _: f64, y: f64) -> f64 {
        self.g.d2(y)
    }
    fn dxy(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// `h(x, y) = f(|x − y|)`.
pub struct DifferenceFn<'a>(pub &'a dyn TestFn);

impl Bivariate for DifferenceFn<'_> {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.0.value((x - y).abs())
    }
    fn dx(&self, x: f64, y: f64) -> f64 {
        (x - y).signum() * self.0.d1((x - y).abs())
    }
    fn dy(&self, x: f64, y: f64) -> f64 {
        -self.dx(x, y)
    }
    fn dxx(&self, x: f64, y: f64) -> f64 {
        self.0.d2((x - y).abs())
    }
    fn dyy(&self, x: f64, y: f64) -> f64 {
        self.dxx(x, y)
    }
    fn dxy(&self, x: f64, y: f64) -> f64 {
        -self.dxx(x, y)
    }
}

struct Swapped<'a>(&'a dyn Bivariate);

impl Bivariate for Swapped<'_> {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.0.value(y, x)
    }
    fn dx(&self, x: f64, y: f64) -> f64 {
        self.0.dy(y, x)
    }
    fn dy(&self, x: f64, y: f64) -> f64 {
        self.0.dx(y, x)
    }
    fn dxx(&self, x: f64, y: f64) -> f64 {
        self.0.dyy(y, x)
    }
    fn dyy(&self, x: f64, y: f64) -> f64 {
        self.0.dxx(y, x)
    }
    fn dxy(&self, x: f64, y: f64) -> f64 {
        self.0.dxy(y, x)
    }
}

/// The full two-point coupling operator applied to `h(x, y)`.
///
/// For `x > y` and `a = (x−y) ∧ κ` the jumps are: `(z, z+a)` at rate
/// `½γ₂(y)μ_{−a}`, `(z, z−a)` at `½γ₂(y)μ_a`, `(z, z)` at
/// `γ₂(y)(ν − ½μ_{−a} − ½μ_a)`, and `(z, 0)` at `(γ₂(x)−γ₂(y))ν`; the
/// Brownian parts are reflected. The synchronous kind keeps only the
/// common and single jumps.
pub fn apply_bivariate_coupling_l(
    h: &dyn Bivariate,
    x: f64,
    y: f64,
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    kappa: f64,
    kind: CouplingKind,
    q: &QuadratureSpec,
) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Domain(format!("need x, y >= 0, got {x}, {y}")));
    }
    if x < y {
        return apply_bivariate_coupling_l(&Swapped(h), y, x, coeffs, nu, kappa, kind, q);
    }
    let (hx, hy) = (h.dx(x, y), h.dy(x, y));
    let (hxx, hyy, hxy) = (h.dxx(x, y), h.dyy(x, y), h.dxy(x, y));
    let h0 = h.value(x, y);
    let cross = coeffs.sqrt_gamma1(x) * coeffs.sqrt_gamma1(y);
    let sign = if x > y { -1.0 } else { 1.0 };
    let mut v = coeffs.gamma0(x) * hx
        + coeffs.gamma0(y) * hy
        + 0.5 * coeffs.gamma1(x) * hxx
        + 0.5 * coeffs.gamma1(y) * hyy
        + sign * cross * hxy;
    if nu.is_zero() {
        return Ok(v);
    }
    let (g2x, g2y) = (coeffs.gamma2(x), coeffs.gamma2(y));
    let zeta = taylor_radius(x.min(y).max(x - y));
    let a = if kind == CouplingKind::Refined { (x - y).min(kappa) } else { 0.0 };

    // third derivatives along the jump directions, by differencing the second
    let eta = 1e-5 * y.max(1e-3);
    let diag2 = |s: f64| h.dxx(x + s, y + s) + 2.0 * h.dxy(x + s, y + s) + h.dyy(x + s, y + s);
    let third = |d: &dyn Fn(f64) -> f64, room: f64| {
        let v = if room >= eta { (d(eta) - d(-eta)) / (2.0 * eta) } else { (d(eta) - d(0.0)) / eta };
        if v.is_finite() { v } else { 0.0 }
    };
    let d3c = third(&diag2, y);
    let d3a = third(&|s: f64| h.dxx(x + s, y), x);

    // increments for each jump type
    let common = |z: f64| {
        if z < zeta {
            z * z * (0.5 * (hxx + 2.0 * hxy + hyy) + d3c * z / 6.0)
        } else {
            h.value(x + z, y + z) - h0 - (hx + hy) * z
        }
    };
    let alone = |z: f64| {
        if z < zeta {
            z * z * (0.5 * hxx + d3a * z / 6.0)
        } else {
            h.value(x + z, y) - h0 - hx * z
        }
    };
    let shifted = |z: f64, s: f64| h.value(x + z, y + z + s) - h0 - hx * z - hy * (z + s);

    if g2y > 0.0 {
        if a > 0.0 {
            let minus = |z: f64| nu.density(z).min(nu.density(z + a));
            let plus = |z: f64| if z > a { nu.density(z).min(nu.density(z - a)) } else { 0.0 };
            let up = nu.density_upper();
            let extra = [a, up - a];
            let dens = |z: f64| {
                let n = nu.density(z);
                if n == 0.0 {
                    return 0.0;
                }
                let (m, p) = (minus(z), plus(z));
                0.5 * m * shifted(z, a) + 0.5 * p * shifted(z, -a) + (n - 0.5 * m - 0.5 * p) * common(z)
            };
            let mut s = integrate_density(&dens, nu, &extra, q)?;
            for at in nu.atoms() {
                let z = at.location;
                let m = nu.rho_atom(-a, z) * at.mass;
                let p = nu.rho_atom(a, z) * at.mass;
                let mut term = (at.mass - 0.5 * m - 0.5 * p) * common(z);
                if m > 0.0 {
                    term += 0.5 * m * shifted(z, a);
                }
                if p > 0.0 {
                    term += 0.5 * p * shifted(z, -a);
                }
                s += term;
            }
            v += g2y * s;
        } else {
            let dens = |z: f64| {
                let n = nu.density(z);
                if n == 0.0 {
                    0.0
                } else {
                    n * common(z)
                }
            };
            let mut s = integrate_density(&dens, nu, &[], q)?;
            for at in nu.atoms() {
                s += at.mass * common(at.location);
            }
            v += g2y * s;
        }
    }
    let d = g2x - g2y;
    if d != 0.0 {
        let dens = |z: f64| {
            let n = nu.density(z);
            if n == 0.0 {
                0.0
            } else {
                n * alone(z)
            }
        };
        let mut s = integrate_density(&dens, nu, &[], q)?;
        for at in nu.atoms() {
            s += at.mass * alone(at.location);
        }
        v += d * s;
    }
    Ok(v)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::{CoupledPath, FailedPath, Grid, SimConfig, SinglePath, SmallJumpPolicy};
use crate::error::Result;
use crate::generator::CouplingKind;
use crate::model::{CoefficientSet, Density, LevyMeasure, MeasureSampler};
use crate::quad::{self, QuadratureSpec};

/// Events per step beyond which a path is declared exploded.
const MAX_EVENTS_PER_STEP: u64 = 10_000_000;

/// Jump-measure quantities the schemes need at the cutoff `ε`.
#[derive(Debug)]
pub struct JumpSetup<'a> {
    nu: &'a LevyMeasure,
    sampler: Option<&'a MeasureSampler>,
    eps: f64,
    /// `ν((ε, ∞))`.
    pub rate: f64,
    /// `∫_ε^∞ z ν(dz)`.
    pub compensator: f64,
    /// `∫_0^ε z² ν(dz)`, used only under Gaussian compensation.
    pub small_variance: f64,
    /// Every density component is a power law, so the total density is
    /// non-increasing and the overlap heads have closed forms.
    power_only: bool,
    small_atoms: Vec<(f64, f64)>,
    q: QuadratureSpec,
}

impl<'a> JumpSetup<'a> {
    pub fn new(nu: &'a LevyMeasure, cfg: &SimConfig) -> Result<Self> {
        let eps = cfg.eps;
        if nu.is_zero() {
            return Ok(JumpSetup {
                nu,
                sampler: None,
                eps,
                rate: 0.0,
                compensator: 0.0,
                small_variance: 0.0,
                power_only: true,
                small_atoms: Vec::new(),
                q: QuadratureSpec::default(),
            });
        }
        let sampler = nu.sampler()?;
        let small_variance = match cfg.small_jumps {
            SmallJumpPolicy::DropWithCompensator => 0.0,
            SmallJumpPolicy::GaussianCompensation => nu.truncated_second_moment(eps)?,
        };
        Ok(JumpSetup {
            nu,
            sampler: Some(sampler),
            eps,
            rate: sampler.mass_above(eps),
            compensator: nu.first_moment_above(eps)?,
            small_variance,
            power_only: nu.densities().iter().all(|(_, d)| matches!(d, Density::PowerLaw { .. })),
            small_atoms: nu.atoms().iter().filter(|a| a.location <= eps).map(|a| (a.location, a.mass)).collect(),
            q: QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-8, ..Default::default() },
        })
    }

    fn active(&self) -> bool {
        self.sampler.is_some()
    }

    /// Mass of the density part above `t`.
    fn density_tail(&self, t: f64) -> f64 {
        self.nu
            .densities()
            .iter()
            .map(|(w, d)| match d {
                Density::PowerLaw { c0, alpha, upper } if t < *upper => {
                    let pu = if upper.is_infinite() { 0.0 } else { upper.powf(-alpha) };
                    w * c0 * (t.powf(-alpha) - pu) / alpha
                }
                _ => 0.0,
            })
            .sum()
    }

    /// `μ_{−a}((0, ε])`: the rate at which a small common jump carries the
    /// lower coordinate up by `a`.
    fn head_up(&self, a: f64) -> f64 {
        let mut s = 0.0;
        if self.nu.has_density() {
            s += if self.power_only {
                self.density_tail(a) - self.density_tail(a + self.eps)
            } else {
                let f = |z: f64| self.nu.density(z).min(self.nu.density(z + a));
                quad::integrate(&f, 0.0, self.eps, &self.q).map(|r| r.value).unwrap_or(0.0)
            };
        }
        for &(z, m) in &self.small_atoms {
            s += m.min(self.nu.atom_mass_at_offset(z, a));
        }
        s.max(0.0)
    }

    /// `μ_a((0, ε])`: small common jumps that push the lower coordinate down by `a`.
    fn head_down(&self, a: f64) -> f64 {
        if a >= self.eps {
            return 0.0;
        }
        let mut s = 0.0;
        if self.nu.has_density() {
            s += if self.power_only {
                self.density_tail(a) - self.density_tail(self.eps)
            } else {
                let f = |z: f64| self.nu.density(z).min(self.nu.density(z - a));
                quad::integrate(&f, a, self.eps, &self.q).map(|r| r.value).unwrap_or(0.0)
            };
        }
        for &(z, m) in &self.small_atoms {
            if z > a {
                s += m.min(self.nu.atom_mass_at_offset(z, -a));
            }
        }
        s.max(0.0)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sampler.expect("active setup").sample_above(self.eps, rng)?.z)
    }
}

fn fail(id: u64, seed: u64, time: f64, reason: impl Into<String>) -> FailedPath {
    FailedPath { id, seed, time, reason: reason.into() }
}

/// Jumps above `ε` over one step of length `h` for a single coordinate,
/// with rate `γ₂(X)ν((ε,∞))` re-read after every jump. The compensator
/// `−γ₂(X)∫_ε^∞ z ν(dz)` is integrated between events at the same frozen state
/// that sets the rate, so jumps minus compensator is an exact martingale.
fn single_jumps<R: Rng>(coeffs: &CoefficientSet, js: &JumpSetup, x: &mut f64, h: f64, rng: &mut R) -> Result<u64> {
    let mut n = 0;
    if !js.active() {
        return Ok(0);
    }
    let mut t = 0.0;
    loop {
        let g2 = coeffs.gamma2(*x);
        let rate = g2 * js.rate;
        let e: f64 = rng.sample(Exp1);
        let next = if rate > 0.0 { t + e / rate } else { f64::INFINITY };
        let dt = next.min(h) - t;
        *x = (*x - g2 * js.compensator * dt).max(0.0);
        if next >= h {
            return Ok(n);
        }
        t = next;
        *x += js.sample(rng)?;
        n += 1;
        if n > MAX_EVENTS_PER_STEP {
            return Err(crate::Error::Unsupported("jump rate exploded".into()));
        }
    }
}

/// Drift, Brownian and (optional) Gaussian small-jump increment from state `x`.
/// The large-jump compensator is handled in the jump phase.
fn continuous_increment(coeffs: &CoefficientSet, js: &JumpSetup, x: f64, h: f64, xi: f64, xi_small: f64) -> f64 {
    let mut d = coeffs.gamma0(x) * h + coeffs.sqrt_gamma1(x) * (h.sqrt() * xi);
    if js.small_variance > 0.0 {
        d += (coeffs.gamma2(x) * js.small_variance * h).sqrt() * xi_small;
    }
    d
}

/// One step: jumps and their compensator first, then drift and noise evaluated
/// at the post-jump state.
fn single_step<R: Rng>(coeffs: &CoefficientSet, js: &JumpSetup, x: f64, h: f64, rng: &mut R) -> Result<(f64, u64)> {
    let mut xn = x;
    let n = single_jumps(coeffs, js, &mut xn, h, rng)?;
    let xi: f64 = rng.sample(StandardNormal);
    let xs: f64 = if js.small_variance > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
    xn += continuous_increment(coeffs, js, xn, h, xi, xs);
    Ok((xn.max(0.0), n))
}

pub(super) fn run_single(
    coeffs: &CoefficientSet,
    js: &JumpSetup,
    x0: f64,
    grid: &Grid,
    id: u64,
    seed: u64,
) -> std::result::Result<SinglePath, FailedPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(grid.record.len());
    let mut next = 0;
    let mut x = x0;
    let mut jumps = 0;
    for k in 0..=grid.steps {
        while next < grid.record.len() && grid.record[next] == k {
            out.push(x);
            next += 1;
        }
        if k == grid.steps {
            break;
        }
        let t = k as f64 * grid.h;
        let (xn, n) = single_step(coeffs, js, x, grid.h, &mut rng).map_err(|e| fail(id, seed, t, e.to_string()))?;
        if !xn.is_finite() {
            return Err(fail(id, seed, t + grid.h, format!("non-finite state {xn}")));
        }
        x = xn;
        jumps += n;
    }
    Ok(SinglePath { id, seed, jumps, x: out })
}

/// State of a coupled pair within one path.
struct Pair {
    x: f64,
    y: f64,
    merged: bool,
    coalescence: f64,
    violations: u32,
    repairs: u32,
    jumps: u64,
}

impl Pair {
    fn merge(&mut self, t: f64) {
        self.y = self.x;
        self.merged = true;
        self.coalescence = t;
    }
}

struct CoupledCtx<'a, 'b> {
    coeffs: &'a CoefficientSet,
    js: &'a JumpSetup<'b>,
    kind: CouplingKind,
    kappa: f64,
    delta_c: f64,
    /// Sign of `x0 − y0`; a step ending with `sign·(X − Y) < −δ_c` is a violation.
    order: f64,
}

impl CoupledCtx<'_, '_> {
    /// Jump phase over `[t0, t0 + h)`: the proposal stream of jumps above `ε`
    /// split over the coupling regions, plus the two streams of small common
    /// jumps whose common part is dropped and only the `±a` displacement of
    /// the lower coordinate is kept.
    fn jumps<R: Rng>(&self, p: &mut Pair, t0: f64, h: f64, rng: &mut R) -> Result<()> {
        if !self.js.active() {
            return Ok(());
        }
        let (coeffs, js) = (self.coeffs, self.js);
        let refined = self.kind == CouplingKind::Refined;
        let mut t = 0.0;
        let mut n = 0u64;
        loop {
            if p.merged {
                let rate = coeffs.gamma2(p.x) * js.rate;
                let next = if rate > 0.0 { t + rng.sample::<f64, _>(Exp1) / rate } else { f64::INFINITY };
                self.compensate(p, t0 + t, next.min(h) - t);
                if next >= h {
                    break;
                }
                t = next;
                p.x += js.sample(rng)?;
                p.y = p.x;
                p.jumps += 1;
            } else {
                let x_hi = p.x >= p.y;
                let (hi, lo) = if x_hi { (p.x, p.y) } else { (p.y, p.x) };
                let a = (hi - lo).min(self.kappa);
                let (g_hi, g_lo) = (coeffs.gamma2(hi), coeffs.gamma2(lo));
                let (gmin, gmax) = (g_hi.min(g_lo), g_hi.max(g_lo));
                let rp = gmax * js.rate;
                let (r_up, r_down) =
                    if refined && gmin > 0.0 { (0.5 * gmin * js.head_up(a), 0.5 * gmin * js.head_down(a)) } else { (0.0, 0.0) };
                let total = rp + r_up + r_down;
                let next = if total > 0.0 { t + rng.sample::<f64, _>(Exp1) / total } else { f64::INFINITY };
                self.compensate(p, t0 + t, next.min(h) - t);
                if next >= h {
                    break;
                }
                t = next;
                if p.merged {
                    continue;
                }
                // rates stay frozen over the interval; the event acts on the compensated state
                let (hi, lo) = if x_hi { (p.x, p.y) } else { (p.y, p.x) };
                let a = (hi - lo).min(self.kappa);
                let pick = rng.random::<f64>() * total;
                let (mut nhi, mut nlo) = (hi, lo);
                if pick < rp {
                    let z = js.sample(rng)?;
                    let u = rng.random::<f64>() * gmax;
                    if u < gmin {
                        let v = u / gmin;
                        let (r1, r2) = if refined {
                            (0.5 * js.nu.rho(-a, z), 0.5 * js.nu.rho(a, z))
                        } else {
                            (0.0, 0.0)
                        };
                        nhi += z;
                        nlo += if v < r1 {
                            z + a
                        } else if v < r1 + r2 {
                            z - a
                        } else {
                            z
                        };
                    } else if g_hi >= g_lo {
                        nhi += z;
                    } else {
                        nlo += z;
                    }
                } else if pick < rp + r_up {
                    nlo += a;
                } else {
                    nlo = (nlo - a).max(0.0);
                }
                p.jumps += 1;
                if x_hi {
                    (p.x, p.y) = (nhi, nlo);
                } else {
                    (p.x, p.y) = (nlo, nhi);
                }
                let u = p.x - p.y;
                if u.abs() <= self.delta_c {
                    if self.order * u < 0.0 {
                        p.repairs += 1;
                    }
                    p.merge(t0 + t);
                } else if self.order * u < 0.0 {
                    p.violations += 1;
                }
            }
            n += 1;
            if n > MAX_EVENTS_PER_STEP {
                return Err(crate::Error::Unsupported("jump rate exploded".into()));
            }
        }
        Ok(())
    }

    /// Applies the large-jump compensator over `dt` at the current state. The
    /// flow is continuous, so crossing the diagonal or entering the `δ_c` band
    /// is a meeting.
    fn compensate(&self, p: &mut Pair, t: f64, dt: f64) {
        let c = self.js.compensator * dt;
        if p.merged {
            p.x = (p.x - self.coeffs.gamma2(p.x) * c).max(0.0);
            p.y = p.x;
            return;
        }
        let u0 = p.x - p.y;
        p.x = (p.x - self.coeffs.gamma2(p.x) * c).max(0.0);
        p.y = (p.y - self.coeffs.gamma2(p.y) * c).max(0.0);
        let u = p.x - p.y;
        if u * u0 <= 0.0 || u.abs() <= self.delta_c {
            p.merge(t + dt);
        }
    }

    fn step<R: Rng>(&self, p: &mut Pair, t0: f64, h: f64, rng: &mut R) -> Result<()> {
        let (coeffs, js) = (self.coeffs, self.js);
        if p.merged {
            let (x, n) = single_step(coeffs, js, p.x, h, rng)?;
            p.x = x;
            p.y = x;
            p.jumps += n;
            return Ok(());
        }
        self.jumps(p, t0, h, rng)?;
        // continuous part from the post-jump state (jump-then-diffuse splitting)
        let (xs, ys) = (p.x, p.y);
        let xi: f64 = rng.sample(StandardNormal);
        let gauss = js.small_variance > 0.0;
        let (common, excess): (f64, f64) =
            if gauss { (rng.sample(StandardNormal), rng.sample(StandardNormal)) } else { (0.0, 0.0) };
        let dx = continuous_increment(coeffs, js, xs, h, xi, 0.0);
        if p.merged {
            let mut x = p.x + dx;
            if gauss {
                x += (coeffs.gamma2(xs) * js.small_variance * h).sqrt() * common;
            }
            p.x = x.max(0.0);
            p.y = p.x;
            return Ok(());
        }
        let sign = match self.kind {
            CouplingKind::Refined => -1.0,
            CouplingKind::Synchronous => 1.0,
        };
        let dy = continuous_increment(coeffs, js, ys, h, sign * xi, 0.0);
        let (mut x1, mut y1) = (p.x + dx, p.y + dy);
        let mut var_u = {
            let s = coeffs.sqrt_gamma1(xs) - sign * coeffs.sqrt_gamma1(ys);
            s * s
        };
        if gauss {
            // common small jumps move both alike; the excess rate moves one
            let (gx, gy) = (coeffs.gamma2(xs), coeffs.gamma2(ys));
            let c = (gx.min(gy) * js.small_variance * h).sqrt() * common;
            let e = ((gx - gy).abs() * js.small_variance * h).sqrt() * excess;
            x1 += c;
            y1 += c;
            if gx >= gy {
                x1 += e;
            } else {
                y1 += e;
            }
            var_u += (gx - gy).abs() * js.small_variance;
        }
        let uj = p.x - p.y;
        let u1 = x1 - y1;
        let t1 = t0 + h;
        p.x = x1.max(0.0);
        p.y = y1.max(0.0);
        if uj * u1 <= 0.0 {
            // the continuous part crossed the diagonal: the pair met inside the step
            if var_u == 0.0 && self.order * u1 < -self.delta_c {
                p.violations += 1;
            }
            p.merge(t1);
            return Ok(());
        }
        if var_u > 0.0 {
            // Brownian-bridge probability of touching the diagonal inside the step
            let hit = (-2.0 * uj * u1 / (var_u * h)).exp();
            if rng.random::<f64>() < hit {
                p.merge(t1);
                return Ok(());
            }
        }
        let u = p.x - p.y;
        if u.abs() <= self.delta_c {
            if self.order * u < 0.0 {
                p.repairs += 1;
            }
            p.merge(t1);
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn run_coupled(
    coeffs: &CoefficientSet,
    js: &JumpSetup,
    x0: f64,
    y0: f64,
    grid: &Grid,
    kind: CouplingKind,
    kappa: f64,
    delta_c: f64,
    id: u64,
    seed: u64,
) -> std::result::Result<CoupledPath, FailedPath> {
    let ctx = CoupledCtx { coeffs, js, kind, kappa, delta_c, order: if x0 >= y0 { 1.0 } else { -1.0 } };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Pair { x: x0, y: y0, merged: false, coalescence: f64::INFINITY, violations: 0, repairs: 0, jumps: 0 };
    if (x0 - y0).abs() <= delta_c {
        p.merge(0.0);
    }
    let mut xs = Vec::with_capacity(grid.record.len());
    let mut ys = Vec::with_capacity(grid.record.len());
    let mut next = 0;
    for k in 0..=grid.steps {
        while next < grid.record.len() && grid.record[next] == k {
            xs.push(p.x);
            ys.push(p.y);
            next += 1;
        }
        if k == grid.steps {
            break;
        }
        let t = k as f64 * grid.h;
        ctx.step(&mut p, t, grid.h, &mut rng).map_err(|e| fail(id, seed, t, e.to_string()))?;
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(fail(id, seed, t + grid.h, format!("non-finite state ({}, {})", p.x, p.y)));
        }
    }
    Ok(CoupledPath {
        id,
        seed,
        coalescence: p.coalescence,
        violations: p.violations,
        repairs: p.repairs,
        jumps: p.jumps,
        x: xs,
        y: ys,
    })
}

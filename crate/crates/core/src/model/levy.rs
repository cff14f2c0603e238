use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::Rng;

use super::sampler::MeasureSampler;
use super::{Mass, RealFn};
use crate::error::{Error, Result};
use crate::quad::{self, QuadratureSpec};

/// Relative tolerance for deciding that two atom locations coincide.
pub const ATOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A Lebesgue density on `(0, upper]`.
#[derive(Clone)]
pub enum Density {
    /// `c0 · z^{-1-α}` on `(0, upper]`; `upper` may be infinite when `α > 1`.
    PowerLaw { c0: f64, alpha: f64, upper: f64 },
    /// Arbitrary non-negative density on `(0, upper]`.
    Custom { f: RealFn, upper: f64, label: String },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::PowerLaw { c0, alpha, upper } => {
                write!(f, "PowerLaw {{ c0: {c0}, alpha: {alpha}, upper: {upper} }}")
            }
            Density::Custom { label, upper, .. } => write!(f, "Custom {{ {label}, upper: {upper} }}"),
        }
    }
}

impl Density {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Density::PowerLaw { c0, alpha, upper } => {
                if z > 0.0 && z <= *upper {
                    c0 * z.powf(-1.0 - alpha)
                } else {
                    0.0
                }
            }
            Density::Custom { f, upper, .. } => {
                if z > 0.0 && z <= *upper {
                    f(z)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            Density::PowerLaw { upper, .. } | Density::Custom { upper, .. } => *upper,
        }
    }

    /// `∫_a^b z^k n(z) dz` for `0 ≤ a ≤ b ≤ ∞`.
    pub fn moment_between(&self, k: f64, a: f64, b: f64, q: &QuadratureSpec) -> Result<f64> {
        let b = b.min(self.upper());
        if b <= a {
            return Ok(0.0);
        }
        match self {
            Density::PowerLaw { c0, alpha, .. } => {
                let e = k - alpha;
                if a == 0.0 && e <= 0.0 {
                    return Err(Error::Validation(format!("moment of order {k} diverges at the origin")));
                }
                if b.is_infinite() && e >= 0.0 {
                    return Err(Error::Validation(format!("moment of order {k} diverges at infinity")));
                }
                if e == 0.0 {
                    Ok(c0 * (b / a).ln())
                } else {
                    let pa = if a == 0.0 { 0.0 } else { a.powf(e) };
                    let pb = if b.is_infinite() { 0.0 } else { b.powf(e) };
                    Ok(c0 * (pb - pa) / e)
                }
            }
            Density::Custom { f, .. } => {
                let g = |z: f64| if z > 0.0 { z.powf(k) * f(z) } else { 0.0 };
                let check = |v: f64| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Validation(format!("moment of order {k} is not finite")))
                    }
                };
                if b.is_finite() {
                    return check(quad::integrate(&g, a, b, q)?.value);
                }
                let split = a.max(1.0);
                let head = if a < split { quad::integrate(&g, a, split, q)?.value } else { 0.0 };
                check(head + quad::integrate_to_infinity(&g, split, q)?.value)
            }
        }
    }
}

/// Which of the three representations a measure was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    AbsolutelyContinuous,
    Atomic,
    Mixture,
}

/// A σ-finite jump measure on `(0, ∞)`: a weighted sum of densities plus a
/// finite list of atoms.
#[derive(Clone)]
pub struct LevyMeasure {
    kind: MeasureKind,
    densities: Vec<(f64, Density)>,
    atoms: Vec<Atom>,
    /// The atoms truncate an infinite series, so the total mass is infinite.
    infinite_series: bool,
    quad: QuadratureSpec,
    second_moment_at_one: f64,
    first_moment_above_one: f64,
    sampler: Arc<OnceLock<std::result::Result<MeasureSampler, String>>>,
}

impl fmt::Debug for LevyMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyMeasure")
            .field("kind", &self.kind)
            .field("densities", &self.densities)
            .field("atoms", &self.atoms.len())
            .finish()
    }
}

fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if (a.location - last.location).abs() <= ATOM_TOL * a.location => last.mass += a.mass,
            _ => out.push(a),
        }
    }
    out
}

impl LevyMeasure {
    fn build(
        kind: MeasureKind,
        densities: Vec<(f64, Density)>,
        atoms: Vec<Atom>,
        infinite_series: bool,
    ) -> Result<Self> {
        for (w, d) in &densities {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::Validation(format!("mixture weight {w} must be positive")));
            }
            if !(d.upper() > 0.0) {
                return Err(Error::Validation("density support bound must be positive".into()));
            }
            match d {
                Density::PowerLaw { c0, alpha, upper } => {
                    if !(*c0 > 0.0 && *alpha > 0.0 && *alpha < 2.0) {
                        return Err(Error::Validation(format!(
                            "power-law density needs c0 > 0 and alpha in (0,2), got c0 = {c0}, alpha = {alpha}"
                        )));
                    }
                    if upper.is_infinite() && *alpha <= 1.0 {
                        return Err(Error::Validation("unbounded power law needs alpha > 1".into()));
                    }
                }
                Density::Custom { f, upper, label } => {
                    let hi = if upper.is_finite() { *upper } else { 1e6 };
                    for i in 1..=200 {
                        let z = hi * 10f64.powf(-8.0 * (1.0 - i as f64 / 200.0));
                        let v = f(z);
                        if !(v.is_finite() && v >= 0.0) {
                            return Err(Error::Validation(format!("density `{label}` is {v} at z = {z}")));
                        }
                    }
                }
            }
        }
        for a in &atoms {
            if !(a.location > 0.0 && a.location.is_finite() && a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::Validation(format!("atom {a:?} must have positive location and mass")));
            }
        }
        let mut m = LevyMeasure {
            kind,
            densities,
            atoms: merge_atoms(atoms),
            infinite_series,
            quad: QuadratureSpec::default(),
            second_moment_at_one: 0.0,
            first_moment_above_one: 0.0,
            sampler: Arc::new(OnceLock::new()),
        };
        // the moment condition ∫ (z ∧ z²) ν(dz) < ∞
        m.second_moment_at_one = m.moment_between(2.0, 0.0, 1.0)?;
        m.first_moment_above_one = m.moment_between(1.0, 1.0, f64::INFINITY)?;
        Ok(m)
    }

    pub fn absolutely_continuous(density: Density) -> Result<Self> {
        Self::build(MeasureKind::AbsolutelyContinuous, vec![(1.0, density)], vec![], false)
    }

    /// Atoms given as `(location, mass)` pairs.
    pub fn atomic(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms = atoms.into_iter().map(|(location, mass)| Atom { location, mass }).collect();
        Self::build(MeasureKind::Atomic, vec![], atoms, false)
    }

    /// The null measure (no jumps).
    pub fn zero() -> Self {
        Self::build(MeasureKind::Atomic, vec![], vec![], false).expect("null measure is valid")
    }

    /// `c0 · z^{-1-α}` on `(0, 1]`.
    pub fn stable_truncated(alpha: f64, c0: f64) -> Result<Self> {
        Self::stable_truncated_upper(alpha, c0, 1.0)
    }

    pub fn stable_truncated_upper(alpha: f64, c0: f64, upper: f64) -> Result<Self> {
        Self::absolutely_continuous(Density::PowerLaw { c0, alpha, upper })
    }

    /// `Σ_{j=0}^{jmax} 2^{αj} δ_{2^{-j}}`, a truncation of the infinite series.
    pub fn dyadic_atoms(alpha: f64, jmax: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain(format!("dyadic atoms need alpha in (0,2), got {alpha}")));
        }
        let atoms = (0..=jmax)
            .map(|j| Atom { location: (-(j as f64)).exp2(), mass: (alpha * j as f64).exp2() })
            .collect();
        Self::build(MeasureKind::Atomic, vec![], atoms, true)
    }

    /// Weighted sum of measures.
    pub fn mixture(parts: Vec<(f64, LevyMeasure)>) -> Result<Self> {
        let mut densities = Vec::new();
        let mut atoms = Vec::new();
        let mut infinite_series = false;
        for (w, m) in parts {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Validation(format!("mixture weight {w} must be positive")));
            }
            densities.extend(m.densities.into_iter().map(|(v, d)| (w * v, d)));
            atoms.extend(m.atoms.into_iter().map(|a| Atom { mass: w * a.mass, ..a }));
            infinite_series |= m.infinite_series;
        }
        Self::build(MeasureKind::Mixture, densities, atoms, infinite_series)
    }

    pub fn with_quadrature(mut self, q: QuadratureSpec) -> Result<Self> {
        q.validate()?;
        self.quad = q;
        Ok(self)
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    pub fn densities(&self) -> &[(f64, Density)] {
        &self.densities
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.densities.is_empty() && self.atoms.is_empty()
    }

    pub fn has_density(&self) -> bool {
        !self.densities.is_empty()
    }

    /// Combined Lebesgue density of the absolutely continuous part.
    #[inline]
    pub fn density(&self, z: f64) -> f64 {
        self.densities.iter().map(|(w, d)| w * d.eval(z)).sum()
    }

    /// Upper end of the support of the absolutely continuous part (0 if none).
    pub fn density_upper(&self) -> f64 {
        self.densities.iter().map(|(_, d)| d.upper()).fold(0.0, f64::max)
    }

    /// Upper end of the whole support.
    pub fn support_upper(&self) -> f64 {
        let atom_max = self.atoms.last().map_or(0.0, |a| a.location);
        self.density_upper().max(atom_max)
    }

    /// Mass of the atom at `z`, or 0 when no atom sits there.
    pub fn atom_mass_at(&self, z: f64) -> f64 {
        let i = self.atoms.partition_point(|a| a.location < z * (1.0 - ATOM_TOL));
        match self.atoms.get(i) {
            Some(a) if (a.location - z).abs() <= ATOM_TOL * z.abs() => a.mass,
            _ => 0.0,
        }
    }

    /// Mass of the atom sitting exactly at `z + s`, where "exactly" is judged
    /// relative to the smaller of the two locations so that `tiny + s` never
    /// rounds onto an atom at `s`.
    pub fn atom_mass_at_offset(&self, z: f64, s: f64) -> f64 {
        let target = z + s;
        if !(target > 0.0) {
            return 0.0;
        }
        let start = self.atoms.partition_point(|a| a.location < target * (1.0 - 1e-9));
        for a in &self.atoms[start..] {
            if a.location > target * (1.0 + 1e-9) {
                break;
            }
            let scale = a.location.min(z);
            let gap = if s >= 0.0 { (a.location - s) - z } else { target - a.location };
            if gap.abs() <= ATOM_TOL * scale {
                return a.mass;
            }
        }
        0.0
    }

    /// `∫_{(a,b]} z^k ν(dz)` for `0 ≤ a ≤ b ≤ ∞`.
    pub fn moment_between(&self, k: f64, a: f64, b: f64) -> Result<f64> {
        let mut s = 0.0;
        for (w, d) in &self.densities {
            s += w * d.moment_between(k, a, b, &self.quad)?;
        }
        let lo = self.atoms.partition_point(|at| at.location <= a);
        let hi = self.atoms.partition_point(|at| at.location <= b);
        // smallest terms first
        for at in &self.atoms[lo..hi] {
            s += at.mass * at.location.powf(k);
        }
        Ok(s)
    }

    /// `ν((r, ∞))`.
    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("tail mass needs r > 0, got {r}")));
        }
        self.moment_between(0.0, r, f64::INFINITY)
    }

    /// `∫_0^r z² ν(dz)`.
    pub fn truncated_second_moment(&self, r: f64) -> Result<f64> {
        self.truncated_moment(2.0, r)
    }

    /// `∫_0^r z^k ν(dz)` for `k ≥ 2`, finite under the moment condition.
    pub fn truncated_moment(&self, k: f64, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("truncated moment needs r > 0, got {r}")));
        }
        if r == 1.0 && k == 2.0 {
            return Ok(self.second_moment_at_one);
        }
        self.moment_between(k, 0.0, r).map_err(|e| match e {
            Error::Quadrature { estimate, .. } => {
                Error::Validation(format!("truncated moment of order {k} diverges (estimate {estimate:e})"))
            }
            e => e,
        })
    }

    /// `∫_ε^∞ z ν(dz)`, the compensator of jumps above `ε`.
    pub fn first_moment_above(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("first moment needs eps > 0, got {eps}")));
        }
        if eps == 1.0 {
            return Ok(self.first_moment_above_one);
        }
        self.moment_between(1.0, eps, f64::INFINITY)
    }

    /// `ν((0, ∞))`.
    pub fn total_mass(&self) -> Mass {
        if self.infinite_series {
            return Mass::Infinite;
        }
        let mut s: f64 = self.atoms.iter().map(|a| a.mass).sum();
        for (w, d) in &self.densities {
            match d {
                Density::PowerLaw { .. } => return Mass::Infinite,
                Density::Custom { .. } => {
                    // partial masses over shrinking neighbourhoods of the origin must settle
                    let u = d.upper().min(1.0);
                    let part = |lo: f64| d.moment_between(0.0, lo, f64::INFINITY, &self.quad);
                    match (part(u * 1e-8), part(u * 1e-12)) {
                        (Ok(m8), Ok(m12)) if (m12 - m8) <= 1e-6 * (1.0 + m12) => {
                            let head = d.moment_between(0.0, 0.0, u * 1e-12, &self.quad).unwrap_or(0.0);
                            s += w * (m12 + head);
                        }
                        _ => return Mass::Infinite,
                    }
                }
            }
        }
        Mass::Finite(s)
    }

    /// `dμ_x/dν` on the absolutely continuous part.
    #[inline]
    pub fn rho_density(&self, x: f64, z: f64) -> f64 {
        if x == 0.0 {
            return 1.0;
        }
        let nz = self.density(z);
        if nz <= 0.0 {
            return 0.0;
        }
        let other = if x > 0.0 {
            if z <= x {
                return 0.0;
            }
            self.density(z - x)
        } else {
            self.density(z - x)
        };
        (other.min(nz) / nz).clamp(0.0, 1.0)
    }

    /// `dμ_x/dν` at an atom location `z`.
    pub fn rho_atom(&self, x: f64, z: f64) -> f64 {
        if x == 0.0 {
            return 1.0;
        }
        let mz = self.atom_mass_at(z);
        if mz <= 0.0 {
            return 0.0;
        }
        (self.atom_mass_at_offset(z, -x).min(mz) / mz).clamp(0.0, 1.0)
    }

    /// `dμ_x/dν` at `z`, dispatching on whether `z` carries an atom.
    pub fn rho(&self, x: f64, z: f64) -> f64 {
        if self.atom_mass_at(z) > 0.0 {
            self.rho_atom(x, z)
        } else {
            self.rho_density(x, z)
        }
    }

    /// `μ_x(ℝ₊)` for `μ_x = ν ∧ (δ_x ∗ ν)`.
    pub fn overlap_mass(&self, x: f64) -> Result<Mass> {
        if x == 0.0 {
            return Ok(self.total_mass());
        }
        let a = x.abs();
        let mut s = 0.0;
        // atomic part: pair atoms at distance a
        for at in &self.atoms {
            let partner = self.atom_mass_at_offset(at.location, a);
            if partner > 0.0 {
                s += partner.min(at.mass);
            }
        }
        // absolutely continuous part
        if let [(w, Density::PowerLaw { c0, alpha, upper })] = self.densities.as_slice() {
            if a < *upper {
                let pu = if upper.is_infinite() { 0.0 } else { upper.powf(-alpha) };
                s += w * c0 * (a.powf(-alpha) - pu) / alpha;
            }
        } else if self.has_density() {
            let u = self.density_upper();
            let q = &self.quad;
            let v = if x > 0.0 {
                let f = |z: f64| self.density(z).min(self.density(z - a));
                if u.is_finite() {
                    if u > a { quad::integrate(&f, a, u, q)?.value } else { 0.0 }
                } else {
                    quad::integrate_to_infinity(&f, a, q)?.value
                }
            } else {
                let f = |z: f64| self.density(z).min(self.density(z + a));
                if u.is_finite() {
                    if u > a { quad::integrate(&f, 0.0, u - a, q)?.value } else { 0.0 }
                } else {
                    quad::integrate_to_infinity(&f, 0.0, q)?.value
                }
            };
            s += v;
        }
        Ok(Mass::Finite(s))
    }

    pub fn overlap(&self, x: f64) -> Result<OverlapMeasure> {
        Ok(OverlapMeasure { mass: self.overlap_mass(x)?, parent: self.clone(), shift: x })
    }

    /// Sampler for `ν` restricted above arbitrary thresholds, built once.
    pub fn sampler(&self) -> Result<&MeasureSampler> {
        self.sampler
            .get_or_init(|| MeasureSampler::new(self).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Unsupported(e.clone()))
    }

    /// Draw `z > ε` from `ν` restricted to `(ε, ∞)` and normalised.
    pub fn sample_jump_above<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("sampling threshold must be positive, got {eps}")));
        }
        Ok(self.sampler()?.sample_above(eps, rng)?.z)
    }
}

/// `μ_x = ν ∧ (δ_x ∗ ν)` with its density ratio and total mass.
#[derive(Debug, Clone)]
pub struct OverlapMeasure {
    pub parent: LevyMeasure,
    pub shift: f64,
    pub mass: Mass,
}

impl OverlapMeasure {
    pub fn rho(&self, z: f64) -> f64 {
        self.parent.rho(self.shift, z)
    }

    /// Lebesgue density of the absolutely continuous part.
    pub fn density(&self, z: f64) -> f64 {
        self.parent.rho_density(self.shift, z) * self.parent.density(z)
    }
}

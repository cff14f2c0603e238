use rand::Rng;

use super::levy::{Density, LevyMeasure};
use super::RealFn;
use crate::error::{Error, Result};
use crate::quad::{self, kronrod21};

/// A sampled jump size, tagged with whether it came from an atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub z: f64,
    pub atomic: bool,
}

#[derive(Debug, Clone)]
enum Component {
    PowerLaw { w: f64, c0: f64, alpha: f64, upper: f64 },
    Table(Table),
    Atoms { locs: Vec<f64>, suffix: Vec<f64> },
}

/// Tabulated tail masses of a custom density on a log grid.
#[derive(Clone)]
struct Table {
    w: f64,
    f: RealFn,
    grid: Vec<f64>,
    /// `tail[i]` is the mass of `(grid[i], upper]`.
    tail: Vec<f64>,
}

impl std::fmt::Debug for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Table({} cells)", self.grid.len() - 1)
    }
}

const CELLS_PER_DECADE: usize = 40;
const TABLE_DECADES: usize = 12;

impl Table {
    fn new(w: f64, f: RealFn, upper: f64, q: &quad::QuadratureSpec) -> Result<Table> {
        let n = CELLS_PER_DECADE * TABLE_DECADES;
        let lo = upper * 10f64.powi(-(TABLE_DECADES as i32));
        let grid: Vec<f64> = (0..=n)
            .map(|i| if i == n { upper } else { lo * 10f64.powf(i as f64 / CELLS_PER_DECADE as f64) })
            .collect();
        let mut tail = vec![0.0; n + 1];
        let g = |z: f64| w * f(z);
        for i in (0..n).rev() {
            tail[i] = tail[i + 1] + quad::integrate(&g, grid[i], grid[i + 1], q)?.value;
        }
        Ok(Table { w, f, grid, tail })
    }

    #[inline]
    fn n(&self, z: f64) -> f64 {
        self.w * (self.f)(z)
    }

    fn upper(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Returns (partial mass from `a` to the next grid point, that grid index).
    fn partial(&self, a: f64) -> (f64, usize) {
        if a < self.grid[0] {
            let v = quad::integrate(&|z: f64| self.n(z), a, self.grid[0], &Default::default())
                .map(|r| r.value)
                .unwrap_or(f64::INFINITY);
            return (v, 0);
        }
        let i = self.grid.partition_point(|&g| g <= a);
        if i >= self.grid.len() {
            return (0.0, self.grid.len() - 1);
        }
        (kronrod21(&|z: f64| self.n(z), a, self.grid[i]).0, i)
    }

    fn mass_above(&self, a: f64) -> f64 {
        if a >= self.upper() {
            return 0.0;
        }
        let (p, i) = self.partial(a);
        p + self.tail[i]
    }

    fn sample_in<R: Rng + ?Sized>(&self, a: f64, b: f64, rng: &mut R) -> Result<f64> {
        let probes = [a, 0.25 * (3.0 * a + b), 0.5 * (a + b), 0.25 * (a + 3.0 * b), b];
        let env = 1.5 * probes.iter().map(|&z| self.n(z.max(f64::MIN_POSITIVE))).fold(0.0, f64::max);
        for _ in 0..100_000 {
            let z = a + (b - a) * rng.random::<f64>();
            if z > a && rng.random::<f64>() * env <= self.n(z) {
                return Ok(z);
            }
        }
        Err(Error::Unsupported(format!("rejection sampling failed on ({a}, {b}]")))
    }

    fn sample_above<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<f64> {
        let (p, i) = self.partial(a);
        let total = p + self.tail[i];
        let t = rng.random::<f64>() * total;
        if t < p {
            let b = self.grid[i];
            return self.sample_in(a, b, rng);
        }
        let target = self.tail[i] - (t - p);
        // cell j spans (grid[j], grid[j+1]] with tail[j] >= target > tail[j+1]
        let j = self.tail.partition_point(|&s| s >= target).saturating_sub(1).max(i);
        let j = j.min(self.grid.len() - 2);
        self.sample_in(self.grid[j], self.grid[j + 1], rng)
    }
}

impl Component {
    fn mass_above(&self, a: f64) -> f64 {
        match self {
            Component::PowerLaw { w, c0, alpha, upper } => {
                if a >= *upper {
                    return 0.0;
                }
                if a <= 0.0 {
                    return f64::INFINITY;
                }
                let pu = if upper.is_infinite() { 0.0 } else { upper.powf(-alpha) };
                w * c0 * (a.powf(-alpha) - pu) / alpha
            }
            Component::Table(t) => t.mass_above(a),
            Component::Atoms { locs, suffix } => suffix[locs.partition_point(|&l| l <= a)],
        }
    }

    fn sample_above<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<Jump> {
        match self {
            Component::PowerLaw { alpha, upper, .. } => {
                let pa = a.powf(-alpha);
                let pu = if upper.is_infinite() { 0.0 } else { upper.powf(-alpha) };
                let v: f64 = rng.random();
                let z = (pa - v * (pa - pu)).powf(-1.0 / alpha);
                Ok(Jump { z: z.clamp(a, *upper), atomic: false })
            }
            Component::Table(t) => Ok(Jump { z: t.sample_above(a, rng)?, atomic: false }),
            Component::Atoms { locs, suffix } => {
                let i = locs.partition_point(|&l| l <= a);
                let target = suffix[i] * (1.0 - rng.random::<f64>());
                let k = suffix.partition_point(|&s| s >= target).saturating_sub(1).clamp(i, locs.len() - 1);
                Ok(Jump { z: locs[k], atomic: true })
            }
        }
    }
}

/// Draws from `ν` restricted to `(a, ∞)` for arbitrary `a > 0`.
///
/// Power laws use the inverse CDF, atoms a weighted choice over suffix sums,
/// and custom densities a log-grid tail table with in-cell rejection.
#[derive(Debug, Clone)]
pub struct MeasureSampler {
    comps: Vec<Component>,
}

impl MeasureSampler {
    pub fn new(nu: &LevyMeasure) -> Result<Self> {
        let mut comps = Vec::new();
        for (w, d) in nu.densities() {
            match d {
                Density::PowerLaw { c0, alpha, upper } => {
                    comps.push(Component::PowerLaw { w: *w, c0: *c0, alpha: *alpha, upper: *upper })
                }
                Density::Custom { f, upper, label } => {
                    if !upper.is_finite() {
                        return Err(Error::Unsupported(format!(
                            "sampling density `{label}` needs a finite support bound"
                        )));
                    }
                    comps.push(Component::Table(Table::new(*w, f.clone(), *upper, nu.quadrature())?));
                }
            }
        }
        if !nu.atoms().is_empty() {
            let locs: Vec<f64> = nu.atoms().iter().map(|a| a.location).collect();
            let mut suffix = vec![0.0; locs.len() + 1];
            for (i, a) in nu.atoms().iter().enumerate().rev() {
                suffix[i] = suffix[i + 1] + a.mass;
            }
            comps.push(Component::Atoms { locs, suffix });
        }
        Ok(MeasureSampler { comps })
    }

    /// `ν((a, ∞))`.
    pub fn mass_above(&self, a: f64) -> f64 {
        self.comps.iter().map(|c| c.mass_above(a)).sum()
    }

    pub fn sample_above<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<Jump> {
        if self.comps.len() == 1 {
            if self.comps[0].mass_above(a) <= 0.0 {
                return Err(Error::NoJump(a));
            }
            return self.comps[0].sample_above(a, rng);
        }
        let masses: Vec<f64> = self.comps.iter().map(|c| c.mass_above(a)).collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NoJump(a));
        }
        let mut t = rng.random::<f64>() * total;
        for (c, m) in self.comps.iter().zip(&masses) {
            if t < *m {
                return c.sample_above(a, rng);
            }
            t -= m;
        }
        let last = masses.iter().rposition(|&m| m > 0.0).unwrap();
        self.comps[last].sample_above(a, rng)
    }
}

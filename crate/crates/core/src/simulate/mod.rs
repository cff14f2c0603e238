//! Euler schemes for the single SDE and for the coupled pair, run as
//! reproducible ensembles.
//!
//! Every path owns a ChaCha8 generator seeded from `(master seed, path id)`,
//! so ensembles are bit-identical whatever the number of worker threads.

mod consistency;
mod io;
mod scheme;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::CouplingKind;
use crate::model::{CoefficientSet, LevyMeasure};

pub use consistency::{ks_two_sample, marginal_consistency, marginal_consistency_from, MarginalCheckpoint, MarginalReport};
pub use io::{read_ensemble_binary, write_ensemble_binary, write_ensemble_csv, write_single_csv};
pub use scheme::JumpSetup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmallJumpPolicy {
    /// Jumps below `ε` are dropped; only the `(ε, ∞)` compensator is applied.
    DropWithCompensator,
    /// Jumps below `ε` are replaced by a Gaussian of matching variance.
    GaussianCompensation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    ClampToZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub step: f64,
    pub eps: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub small_jumps: SmallJumpPolicy,
    pub boundary: BoundaryPolicy,
    /// `δ_c`; `None` means `1e-6 · (1 + x0)`.
    pub coalescence: Option<f64>,
    pub kappa: f64,
    pub kind: CouplingKind,
    /// Recording times; empty means every grid point.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step: 1e-3,
            eps: 1e-2,
            horizon: 1.0,
            paths: 1000,
            seed: 0,
            small_jumps: SmallJumpPolicy::DropWithCompensator,
            boundary: BoundaryPolicy::ClampToZero,
            coalescence: None,
            kappa: 1.0,
            kind: CouplingKind::Refined,
            checkpoints: Vec::new(),
            threads: None,
        }
    }
}

/// Largest number of recorded values (paths × checkpoints) an ensemble may hold.
const MAX_RECORDED: usize = 400_000_000;

/// The time grid and the recorded step indices derived from a config.
#[derive(Debug, Clone)]
pub(crate) struct Grid {
    pub h: f64,
    pub steps: usize,
    /// Sorted, deduplicated step indices at which the state is recorded.
    pub record: Vec<usize>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{what} must be positive and finite, got {v}")))
            }
        };
        pos(self.step, "step h")?;
        pos(self.eps, "jump cutoff eps")?;
        pos(self.horizon, "horizon")?;
        pos(self.kappa, "kappa")?;
        if let Some(d) = self.coalescence {
            pos(d, "coalescence threshold")?;
        }
        if self.paths == 0 {
            return Err(Error::Domain("path count must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Domain("thread count must be at least 1".into()));
        }
        if self.step > self.horizon {
            return Err(Error::Domain(format!("step {} exceeds horizon {}", self.step, self.horizon)));
        }
        Ok(())
    }

    pub fn delta_c(&self, x0: f64) -> f64 {
        self.coalescence.unwrap_or(1e-6 * (1.0 + x0.abs()))
    }

    /// The grid ends exactly at the horizon; the step actually used is
    /// `horizon / ceil(horizon / h)`, never larger than `h`.
    pub(crate) fn grid(&self) -> Result<Grid> {
        self.validate()?;
        let steps = ((self.horizon / self.step) - 1e-9).ceil().max(1.0) as usize;
        let h = self.horizon / steps as f64;
        let mut record: Vec<usize> = if self.checkpoints.is_empty() {
            (0..=steps).collect()
        } else {
            let mut v = Vec::with_capacity(self.checkpoints.len());
            for &t in &self.checkpoints {
                if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
                    return Err(Error::Domain(format!("checkpoint {t} outside [0, {}]", self.horizon)));
                }
                let k = (t / h).round();
                if (k * h - t).abs() > 1e-9 * t.max(1.0) {
                    return Err(Error::Domain(format!("checkpoint {t} is not on the step grid (h = {h})")));
                }
                v.push(k as usize);
            }
            v
        };
        record.sort_unstable();
        record.dedup();
        if record.len().saturating_mul(self.paths) > MAX_RECORDED {
            return Err(Error::Domain(format!(
                "{} paths x {} recorded times exceeds the recording budget; set checkpoints",
                self.paths,
                record.len()
            )));
        }
        Ok(Grid { h, steps, record })
    }

    /// Config echo as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("SimConfig serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

/// One coupled path: states at the recorded times, coalescence time (∞ if
/// none), order bookkeeping and its generator seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub id: u64,
    pub seed: u64,
    pub coalescence: f64,
    /// Steps ending with the order reversed by more than `δ_c`.
    pub violations: u32,
    /// Reversals within `δ_c`, projected onto the diagonal.
    pub repairs: u32,
    pub jumps: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// A path that produced a non-finite state and was excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedPath {
    pub id: u64,
    pub seed: u64,
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CoupledEnsemble {
    pub config: SimConfig,
    pub x0: f64,
    pub y0: f64,
    /// Recorded times (grid points).
    pub times: Vec<f64>,
    pub paths: Vec<CoupledPath>,
    pub failed: Vec<FailedPath>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinglePath {
    pub id: u64,
    pub seed: u64,
    pub jumps: u64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub config: SimConfig,
    pub x0: f64,
    pub times: Vec<f64>,
    pub paths: Vec<SinglePath>,
    pub failed: Vec<FailedPath>,
}

/// Index of a recorded time `t`, matched to within grid rounding.
fn time_index(times: &[f64], t: f64) -> Result<usize> {
    let tol = 1e-9 * t.abs().max(1.0);
    times
        .iter()
        .position(|&s| (s - t).abs() <= tol)
        .ok_or_else(|| Error::Domain(format!("time {t} is not a recorded checkpoint")))
}

impl CoupledEnsemble {
    pub fn time_index(&self, t: f64) -> Result<usize> {
        time_index(&self.times, t)
    }

    /// X-coordinates of all paths at recorded time `t`.
    pub fn x_at(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.time_index(t)?;
        Ok(self.paths.iter().map(|p| p.x[k]).collect())
    }

    pub fn y_at(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.time_index(t)?;
        Ok(self.paths.iter().map(|p| p.y[k]).collect())
    }

    pub fn total_violations(&self) -> u64 {
        self.paths.iter().map(|p| p.violations as u64).sum()
    }

    pub fn total_repairs(&self) -> u64 {
        self.paths.iter().map(|p| p.repairs as u64).sum()
    }

    /// Largest `|X − Y|` at recorded times after each path's coalescence time.
    pub fn max_gap_after_coalescence(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in &self.paths {
            for (k, &t) in self.times.iter().enumerate() {
                if t >= p.coalescence {
                    worst = worst.max((p.x[k] - p.y[k]).abs());
                }
            }
        }
        worst
    }
}

impl PathEnsemble {
    pub fn time_index(&self, t: f64) -> Result<usize> {
        time_index(&self.times, t)
    }

    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.time_index(t)?;
        Ok(self.paths.iter().map(|p| p.x[k]).collect())
    }
}

/// SplitMix64 finalizer: per-path seeds from the master seed and the path id.
pub fn path_seed(master: u64, id: u64) -> u64 {
    let mut z = master ^ id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps `f` over path ids `0..n` in parallel, keeping id order.
fn run_paths<T: Send>(n: usize, threads: Option<usize>, f: impl Fn(u64) -> T + Sync + Send) -> Result<Vec<T>> {
    let work = || (0..n as u64).into_par_iter().map(&f).collect::<Vec<T>>();
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

fn check_start(v: f64, what: &str) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite and >= 0, got {v}")))
    }
}

/// Euler–Maruyama ensemble for the single SDE started at `x0`.
pub fn simulate_single(coeffs: &CoefficientSet, nu: &LevyMeasure, x0: f64, cfg: &SimConfig) -> Result<PathEnsemble> {
    check_start(x0, "x0")?;
    let grid = cfg.grid()?;
    let setup = JumpSetup::new(nu, cfg)?;
    let results = run_paths(cfg.paths, cfg.threads, |id| {
        let seed = path_seed(cfg.seed, id);
        scheme::run_single(coeffs, &setup, x0, &grid, id, seed)
    })?;
    let mut paths = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(f) => failed.push(f),
        }
    }
    Ok(PathEnsemble {
        config: cfg.clone(),
        x0,
        times: grid.record.iter().map(|&k| k as f64 * grid.h).collect(),
        paths,
        failed,
    })
}

/// Ensemble of the coupled pair started at `(x0, y0)`.
pub fn simulate_coupled(
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    x0: f64,
    y0: f64,
    cfg: &SimConfig,
) -> Result<CoupledEnsemble> {
    check_start(x0, "x0")?;
    check_start(y0, "y0")?;
    let grid = cfg.grid()?;
    let setup = JumpSetup::new(nu, cfg)?;
    let delta_c = cfg.delta_c(x0.max(y0));
    let results = run_paths(cfg.paths, cfg.threads, |id| {
        let seed = path_seed(cfg.seed, id);
        scheme::run_coupled(coeffs, &setup, x0, y0, &grid, cfg.kind, cfg.kappa, delta_c, id, seed)
    })?;
    let mut paths = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(f) => failed.push(f),
        }
    }
    Ok(CoupledEnsemble {
        config: cfg.clone(),
        x0,
        y0,
        times: grid.record.iter().map(|&k| k as f64 * grid.h).collect(),
        paths,
        failed,
    })
}

#[cfg(test)]
mod tests;

use std::fmt;

use super::{simulate_coupled, simulate_single, SimConfig};
use crate::error::{Error, Result};
use crate::model::{CoefficientSet, LevyMeasure};

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        // step past every copy of the smaller value in both samples
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalCheckpoint {
    pub t: f64,
    pub mean_single: f64,
    pub mean_coupled: f64,
    pub second_single: f64,
    pub second_coupled: f64,
    pub ks: f64,
}

#[derive(Debug, Clone)]
pub struct MarginalReport {
    pub checkpoints: Vec<MarginalCheckpoint>,
    pub max_ks: f64,
    pub paths: usize,
}

impl MarginalReport {
    pub fn passes(&self, ks_tol: f64) -> bool {
        self.max_ks < ks_tol
    }
}

impl fmt::Display for MarginalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "marginal consistency over {} paths: max KS = {:.5}", self.paths, self.max_ks)?;
        for c in &self.checkpoints {
            writeln!(
                f,
                "  t = {}: mean {:.5} vs {:.5}, second moment {:.5} vs {:.5}, KS {:.5}",
                c.t, c.mean_single, c.mean_coupled, c.second_single, c.second_coupled, c.ks
            )?;
        }
        Ok(())
    }
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    (v.iter().sum::<f64>() / n, v.iter().map(|x| x * x).sum::<f64>() / n)
}

/// Compares the single-SDE law from `x0` with the X-marginal of the pair
/// started at `(x0, x0 / 2)`.
pub fn marginal_consistency(coeffs: &CoefficientSet, nu: &LevyMeasure, x0: f64, cfg: &SimConfig) -> Result<MarginalReport> {
    marginal_consistency_from(coeffs, nu, x0, 0.5 * x0, cfg)
}

/// As [`marginal_consistency`] with an explicit second starting point. The
/// coupled run uses an independent master seed.
pub fn marginal_consistency_from(
    coeffs: &CoefficientSet,
    nu: &LevyMeasure,
    x0: f64,
    y0: f64,
    cfg: &SimConfig,
) -> Result<MarginalReport> {
    let single = simulate_single(coeffs, nu, x0, cfg)?;
    let other = SimConfig { seed: cfg.seed ^ 0xA5A5_5A5A_C3C3_3C3C, ..cfg.clone() };
    let coupled = simulate_coupled(coeffs, nu, x0, y0, &other)?;
    let mut checkpoints = Vec::new();
    let mut max_ks = 0.0f64;
    for &t in single.times.iter().filter(|&&t| t > 0.0) {
        let a = single.at(t)?;
        let b = coupled.x_at(t)?;
        let ks = ks_two_sample(&a, &b)?;
        let (m1a, m2a) = moments(&a);
        let (m1b, m2b) = moments(&b);
        max_ks = max_ks.max(ks);
        checkpoints.push(MarginalCheckpoint {
            t,
            mean_single: m1a,
            mean_coupled: m1b,
            second_single: m2a,
            second_coupled: m2b,
            ks,
        });
    }
    Ok(MarginalReport { checkpoints, max_ks, paths: single.paths.len().min(coupled.paths.len()) })
}

//! Distance estimates from coupled ensembles, exponential rate fits and
//! stationary summaries.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::simulate::{CoupledEnsemble, PathEnsemble};

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `𝔼|X_t − Y_t|` with its standard error: an upper bound on `W₁` between
/// the two marginal laws.
pub fn w1_upper(ens: &CoupledEnsemble, t: f64) -> Result<(f64, f64)> {
    if ens.paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let k = ens.time_index(t)?;
    let gaps: Vec<f64> = ens.paths.iter().map(|p| (p.x[k] - p.y[k]).abs()).collect();
    Ok(mean_and_se(&gaps))
}

/// Coalescence bound on total variation at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvBound {
    /// `ℙ(T > t)`, bounding `½‖P_t(x,·) − P_t(y,·)‖_Var`.
    pub fraction: f64,
    /// Binomial standard error of `fraction`.
    pub se: f64,
    /// Paths still apart at `t`.
    pub alive: usize,
}

impl TvBound {
    /// The bound on the unnormalised variation norm, `2ℙ(T > t)`.
    pub fn var_norm(&self) -> f64 {
        2.0 * self.fraction
    }

    pub fn var_norm_se(&self) -> f64 {
        2.0 * self.se
    }
}

pub fn tv_upper(ens: &CoupledEnsemble, t: f64) -> Result<TvBound> {
    if ens.paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    ens.time_index(t)?;
    let alive = ens.paths.iter().filter(|p| p.coalescence > t).count();
    let n = ens.paths.len() as f64;
    let p = alive as f64 / n;
    Ok(TvBound { fraction: p, se: (p * (1.0 - p) / n).sqrt(), alive })
}

/// Exact `W₁` between two empirical laws of equal size: the mean absolute
/// difference of matched order statistics. Inputs are sorted internally.
pub fn empirical_w1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Least-squares fit of `d ≈ C e^{−λt}` on the log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub lambda: f64,
    pub prefactor: f64,
    /// Standard error of `λ̂` from the regression residuals.
    pub lambda_se: f64,
    /// Standard error of `log Ĉ`.
    pub log_prefactor_se: f64,
    /// Times actually used.
    pub window: Vec<f64>,
}

impl RateFit {
    /// 95% normal band for `λ̂`.
    pub fn lambda_band(&self) -> (f64, f64) {
        (self.lambda - 1.96 * self.lambda_se, self.lambda + 1.96 * self.lambda_se)
    }

    pub fn prefactor_band(&self) -> (f64, f64) {
        let l = self.prefactor.ln();
        ((l - 1.96 * self.log_prefactor_se).exp(), (l + 1.96 * self.log_prefactor_se).exp())
    }

    pub fn to_kv(&self, prefix: &str) -> String {
        let (lo, hi) = self.lambda_band();
        let (clo, chi) = self.prefactor_band();
        let w: Vec<String> = self.window.iter().map(|t| t.to_string()).collect();
        format!(
            "{prefix}.lambda = {}\n{prefix}.lambda_se = {}\n{prefix}.lambda_band = {lo} {hi}\n\
             {prefix}.prefactor = {}\n{prefix}.prefactor_band = {clo} {chi}\n{prefix}.window = {}\n",
            self.lambda,
            self.lambda_se,
            self.prefactor,
            w.join(" ")
        )
    }
}

/// Fits `(λ̂, Ĉ)` to `(t_k, d_k)` restricted to `window` (inclusive; all
/// points when `None`). Points with `d_k ≤ 0` are dropped from the window.
pub fn fit_rate(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<RateFit> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, d)| window.is_none_or(|(a, b)| t >= a && t <= b) && d > 0.0 && d.is_finite())
        .collect();
    if used.len() < 3 {
        return Err(Error::Precondition(format!("rate fit needs at least 3 positive points, got {}", used.len())));
    }
    let n = used.len() as f64;
    let tm = used.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = used.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Precondition("rate fit needs distinct times".into()));
    }
    let sxy: f64 = used.iter().map(|p| (p.0 - tm) * (p.1.ln() - lm)).sum();
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let rss: f64 = used.iter().map(|p| (p.1.ln() - intercept - slope * p.0).powi(2)).sum();
    let s2 = if used.len() > 2 { rss / (n - 2.0) } else { 0.0 };
    let sum_t2: f64 = used.iter().map(|p| p.0 * p.0).sum();
    Ok(RateFit {
        lambda: -slope,
        prefactor: intercept.exp(),
        lambda_se: (s2 / sxx).sqrt(),
        log_prefactor_se: (s2 * sum_t2 / (n * sxx)).sqrt(),
        window: used.iter().map(|p| p.0).collect(),
    })
}

/// Distance estimates at checkpoints with the fitted rates.
#[derive(Debug, Clone)]
pub struct DecayCurve {
    pub t: Vec<f64>,
    pub w1: Vec<f64>,
    pub w1_se: Vec<f64>,
    pub tv: Vec<f64>,
    pub tv_se: Vec<f64>,
    pub alive: Vec<usize>,
    pub w1_fit: Option<RateFit>,
    pub tv_fit: Option<RateFit>,
}

/// Points where the estimate clears ten standard errors.
fn default_window(t: &[f64], d: &[f64], se: &[f64]) -> Vec<(f64, f64)> {
    t.iter().zip(d).zip(se).filter(|((_, &d), &s)| d > 10.0 * s).map(|((&t, &d), _)| (t, d)).collect()
}

impl DecayCurve {
    /// Evaluates both bounds at `checkpoints` (all recorded times when
    /// empty); fits use the points with estimate > 10·se.
    pub fn from_ensemble(ens: &CoupledEnsemble, checkpoints: &[f64]) -> Result<Self> {
        let ts: Vec<f64> = if checkpoints.is_empty() { ens.times.clone() } else { checkpoints.to_vec() };
        let mut c = DecayCurve {
            t: Vec::new(),
            w1: Vec::new(),
            w1_se: Vec::new(),
            tv: Vec::new(),
            tv_se: Vec::new(),
            alive: Vec::new(),
            w1_fit: None,
            tv_fit: None,
        };
        for &t in &ts {
            let (w, s) = w1_upper(ens, t)?;
            let tv = tv_upper(ens, t)?;
            c.t.push(t);
            c.w1.push(w);
            c.w1_se.push(s);
            c.tv.push(tv.fraction);
            c.tv_se.push(tv.se);
            c.alive.push(tv.alive);
        }
        c.w1_fit = fit_rate(&default_window(&c.t, &c.w1, &c.w1_se), None).ok();
        c.tv_fit = fit_rate(&default_window(&c.t, &c.tv, &c.tv_se), None).ok();
        Ok(c)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,w1_est,w1_se,tv_frac,tv_se,n_alive\n");
        for k in 0..self.t.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.t[k], self.w1[k], self.w1_se[k], self.tv[k], self.tv_se[k], self.alive[k]
            );
        }
        s
    }

    /// Fit summary as `key = value` lines; the TV bound is given both as
    /// `ℙ(T > t)` and as the variation-norm bound `2ℙ(T > t)`.
    pub fn summary_kv(&self) -> String {
        let mut s = String::new();
        match &self.w1_fit {
            Some(f) => s.push_str(&f.to_kv("w1_fit")),
            None => s.push_str("w1_fit = unavailable\n"),
        }
        match &self.tv_fit {
            Some(f) => s.push_str(&f.to_kv("tv_fit")),
            None => s.push_str("tv_fit = unavailable\n"),
        }
        for k in 0..self.t.len() {
            let _ = writeln!(s, "tv_var_bound[t={}] = {}", self.t[k], 2.0 * self.tv[k]);
        }
        s
    }

    /// Whether `w1` is non-increasing along the checkpoints.
    pub fn w1_non_increasing(&self) -> bool {
        self.w1.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn tv_strictly_decreasing(&self) -> bool {
        self.tv.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    /// Values above `hi`.
    pub overflow: usize,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::Domain(format!("histogram needs lo < hi and bins > 0, got [{lo}, {hi}], {bins}")));
        }
        let mut counts = vec![0; bins];
        let mut overflow = 0;
        let w = (hi - lo) / bins as f64;
        for &v in values {
            if v > hi {
                overflow += 1;
            } else if v >= lo {
                counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
            }
        }
        Ok(Histogram { lo, hi, counts, overflow })
    }

    pub fn to_csv(&self) -> String {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{c}", self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w);
        }
        let _ = writeln!(s, "{},inf,{}", self.hi, self.overflow);
        s
    }
}

/// Post-burn-in moments and a histogram.
#[derive(Debug, Clone)]
pub struct InvariantSummary {
    pub burn_in: f64,
    pub samples: usize,
    pub mean: f64,
    /// Across-path standard error of the mean (paths are independent).
    pub mean_se: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub mass_at_zero: f64,
    pub histogram: Histogram,
}

impl InvariantSummary {
    pub fn to_kv(&self) -> String {
        format!(
            "invariant.burn_in = {}\ninvariant.samples = {}\ninvariant.mean = {}\ninvariant.mean_se = {}\n\
             invariant.second_moment = {}\ninvariant.variance = {}\ninvariant.mass_at_zero = {}\n",
            self.burn_in, self.samples, self.mean, self.mean_se, self.second_moment, self.variance, self.mass_at_zero
        )
    }
}

/// Pools every recorded value at times `≥ burn_in`. The histogram spans
/// `[0, hi]` in `bins` cells, `hi` defaulting to the largest value.
pub fn invariant_summary(ens: &PathEnsemble, burn_in: f64, bins: usize, hi: Option<f64>) -> Result<InvariantSummary> {
    let horizon = ens.config.horizon;
    if !(burn_in < horizon) {
        return Err(Error::Domain(format!("burn-in {burn_in} must be below the horizon {horizon}")));
    }
    if ens.paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let ks: Vec<usize> = (0..ens.times.len()).filter(|&k| ens.times[k] >= burn_in).collect();
    if ks.is_empty() {
        return Err(Error::Domain(format!("no recorded time at or after burn-in {burn_in}")));
    }
    let mut values = Vec::with_capacity(ks.len() * ens.paths.len());
    let mut path_means = Vec::with_capacity(ens.paths.len());
    for p in &ens.paths {
        let vs: Vec<f64> = ks.iter().map(|&k| p.x[k]).collect();
        path_means.push(vs.iter().sum::<f64>() / vs.len() as f64);
        values.extend(vs);
    }
    let n = values.len() as f64;
    let (mean, mean_se) = mean_and_se(&path_means);
    let second_moment = values.iter().map(|v| v * v).sum::<f64>() / n;
    let top = hi.unwrap_or_else(|| values.iter().copied().fold(0.0, f64::max)).max(f64::MIN_POSITIVE);
    Ok(InvariantSummary {
        burn_in,
        samples: values.len(),
        mean,
        mean_se,
        second_moment,
        variance: second_moment - mean * mean,
        mass_at_zero: values.iter().filter(|&&v| v == 0.0).count() as f64 / n,
        histogram: Histogram::new(&values, 0.0, top, bins)?,
    })
}

/// `empirical_w1` between two ensembles at their final recorded time.
pub fn tail_distance(a: &PathEnsemble, b: &PathEnsemble) -> Result<f64> {
    let ta = *a.times.last().ok_or(Error::EmptyEnsemble)?;
    let tb = *b.times.last().ok_or(Error::EmptyEnsemble)?;
    let n = a.paths.len().min(b.paths.len());
    empirical_w1(&a.at(ta)?[..n], &b.at(tb)?[..n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::CouplingKind;
    use crate::model::{CirDiffusion, CoefficientSet, LevyMeasure};
    use crate::simulate::{simulate_coupled, simulate_single, SimConfig};

    #[test]
    fn fit_recovers_exact_exponentials() {
        let pts: Vec<(f64, f64)> = [0.5f64, 1.0, 2.0, 4.0].iter().map(|&t| (t, (-2.0 * t).exp())).collect();
        let f = fit_rate(&pts, None).unwrap();
        assert!((f.lambda - 2.0).abs() < 1e-10 * 2.0);
        assert!((f.prefactor - 1.0).abs() < 1e-10);
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 3.5 * (-0.7 * k as f64).exp())).collect();
        let f = fit_rate(&pts, None).unwrap();
        assert!((f.lambda / 0.7 - 1.0).abs() < 1e-10 && (f.prefactor / 3.5 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fit_window_shrinks_past_zeros() {
        let pts = [(0.0, 1.0), (1.0, (-1f64).exp()), (2.0, (-2f64).exp()), (3.0, 0.0)];
        let f = fit_rate(&pts, None).unwrap();
        assert_eq!(f.window, vec![0.0, 1.0, 2.0]);
        assert!(fit_rate(&pts, Some((1.0, 3.0))).is_err());
    }

    #[test]
    fn empirical_w1_examples() {
        assert_eq!(empirical_w1(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(empirical_w1(&[0.0; 4], &[1.0; 4]).unwrap(), 1.0);
        assert!(matches!(empirical_w1(&[0.0], &[1.0, 2.0]), Err(Error::SizeMismatch(1, 2))));
    }

    fn cir() -> CoefficientSet {
        CoefficientSet::cir(1.0, 0.5, 1.0, CirDiffusion::Literal).unwrap()
    }

    #[test]
    fn distances_vanish_for_equal_starts_and_start_at_one() {
        let conf = SimConfig { paths: 50, checkpoints: vec![0.0, 0.5], horizon: 0.5, ..SimConfig::default() };
        let e = simulate_coupled(&cir(), &LevyMeasure::zero(), 1.0, 1.0, &conf).unwrap();
        assert_eq!(w1_upper(&e, 0.5).unwrap().0, 0.0);
        assert_eq!(tv_upper(&e, 0.5).unwrap().fraction, 0.0);
        let e = simulate_coupled(&cir(), &LevyMeasure::zero(), 2.0, 1.0, &conf).unwrap();
        let tv = tv_upper(&e, 0.0).unwrap();
        assert_eq!((tv.fraction, tv.var_norm()), (1.0, 2.0));
        assert!(matches!(w1_upper(&e, 0.25), Err(Error::Domain(_))));
    }

    #[test]
    fn coupled_w1_dominates_marginal_distance() {
        let conf = SimConfig {
            paths: 20_000,
            checkpoints: vec![1.0],
            kind: CouplingKind::Synchronous,
            seed: 3,
            ..SimConfig::default()
        };
        let e = simulate_coupled(&cir(), &LevyMeasure::zero(), 2.0, 1.0, &conf).unwrap();
        let (w, se) = w1_upper(&e, 1.0).unwrap();
        assert!((w - (-1f64).exp()).abs() < 3.0 * se, "{w} ± {se}");
        let a = simulate_single(&cir(), &LevyMeasure::zero(), 2.0, &SimConfig { seed: 5, ..conf.clone() }).unwrap();
        let b = simulate_single(&cir(), &LevyMeasure::zero(), 1.0, &SimConfig { seed: 6, ..conf }).unwrap();
        let emp = empirical_w1(&a.at(1.0).unwrap(), &b.at(1.0).unwrap()).unwrap();
        assert!(emp <= w + 3.0 * se * 2f64.sqrt(), "{emp} vs {w}");
    }

    #[test]
    fn cir_stationary_mean() {
        let conf = SimConfig {
            paths: 4000,
            horizon: 10.0,
            step: 1e-2,
            checkpoints: (10..=20).map(|k| k as f64 * 0.5).collect(),
            ..SimConfig::default()
        };
        let e = simulate_single(&cir(), &LevyMeasure::zero(), 3.0, &conf).unwrap();
        let s = invariant_summary(&e, 5.0, 20, None).unwrap();
        assert!((s.mean - 1.0).abs() < 3.0 * s.mean_se + 0.01, "{}", s.to_kv());
        assert_eq!(s.histogram.counts.iter().sum::<usize>() + s.histogram.overflow, s.samples);
        assert!(invariant_summary(&e, 10.0, 20, None).is_err());
    }
}

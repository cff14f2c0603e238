//! Named experiments: a configuration layer over the model, the condition
//! checks and the simulators, plus the pipelines the command line runs.

mod config;
#[cfg(test)]
mod tests;

use std::fmt::Write as _;

pub use config::{
    ChecksSpec, CirReading, Config, GridSpec, InvariantSpec, MeasureSpec, ModelSpec, ModulusSpec, NoiseCaseSpec,
    NoiseSpec, Phi1Spec, Phi2Spec, ScenarioSpec, PRESETS,
};

use crate::error::{Error, Result};
use crate::estimate::{invariant_summary, tail_distance, DecayCurve, InvariantSummary};
use crate::generator::{
    check_dissipation_condition, check_drift_condition, check_noise_conditions, check_tv_condition, grid_rate,
    pair_grid, verify_lyapunov, ConditionReport, LyapunovMode, LyapunovSpec, NoiseDescriptor, Verdict,
};
use crate::model::{CoefficientSet, LevyMeasure, Mass};
use crate::quad::QuadratureSpec;
use crate::simulate::{simulate_coupled, simulate_single, CoupledEnsemble, PathEnsemble, SimConfig};
use crate::testfn::{
    build_strong_psi, build_tv_fn, derive_constants, log_grid, ContractionConstants, DriftModulus, PsiFunction,
    PsiVariant, TVTestFunction, TheoremCase,
};

/// A scenario with its references resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub spec: ScenarioSpec,
    pub coeffs: CoefficientSet,
    pub nu: LevyMeasure,
    pub modulus: DriftModulus,
}

/// Command-line overrides of the simulation settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub step: Option<f64>,
    pub threads: Option<usize>,
}

impl Scenario {
    /// A bundled preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        Config::presets().scenario(name)
    }

    pub fn sim(&self) -> &SimConfig {
        &self.spec.sim
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        let sim = &mut self.spec.sim;
        if let Some(s) = o.seed {
            sim.seed = s;
        }
        if let Some(n) = o.paths {
            sim.paths = n;
        }
        if let Some(h) = o.step {
            sim.step = h;
        }
        if o.threads.is_some() {
            sim.threads = o.threads;
        }
        sim.validate()
    }

    pub fn noise(&self) -> NoiseDescriptor {
        NoiseDescriptor { case: self.spec.noise.case.into(), l0: self.modulus.l0, kappa: self.spec.noise.kappa }
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        let g = &self.spec.grid;
        pair_grid(g.rmin, g.rmax, g.n, &g.ys)
    }

    /// Grid pairs with `x − y ≥ 1/n`, where `f_n` has left the bridge.
    fn tv_pairs(&self) -> Vec<(f64, f64)> {
        let g = &self.spec.grid;
        let lo = g.rmin.max(1.0 / self.spec.checks.tv_n as f64);
        pair_grid(lo, g.rmax.max(2.0 * lo), g.n, &g.ys)
    }
}

/// `(α, β)` entering the total-variation test function; `α = 2` stands
/// for the diffusion case.
fn tv_exponents(case: &TheoremCase) -> (f64, f64) {
    match *case {
        TheoremCase::A1 { beta, .. } => (2.0, beta),
        TheoremCase::A2 { alpha, beta, .. } => (alpha, beta),
    }
}

#[derive(Debug, Clone)]
pub enum StrongBranch {
    /// Bounded test function built and `L̃f_n ≤ −λ_u` on the grid.
    Accepted { sup_psi: f64, lambda_u: f64 },
    Rejected(String),
}

impl StrongBranch {
    pub fn accepted(&self) -> bool {
        matches!(self, StrongBranch::Accepted { .. })
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub scenario: String,
    pub reports: Vec<ConditionReport>,
    pub constants: Option<ContractionConstants>,
    pub strong: StrongBranch,
    pub errors: Vec<String>,
}

impl CheckOutcome {
    pub fn report(&self, id: &str) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.id == id)
    }

    /// Every applicable verdict holds and the constants exist.
    pub fn passed(&self) -> bool {
        self.errors.is_empty()
            && self.constants.is_some()
            && self.reports.iter().all(|r| !matches!(r.verdict, Verdict::FailsAt { .. }))
            && self.reports.iter().filter(|r| r.id.starts_with("Thm1.1") || r.id == "A1" || r.id == "A2").all(|r| r.holds())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("scenario = {}\n", self.scenario);
        for r in &self.reports {
            s.push_str(&r.to_kv());
        }
        if let Some(c) = &self.constants {
            for (k, v) in c.to_kv() {
                let _ = writeln!(s, "constants.{k} = {v}");
            }
        }
        match &self.strong {
            StrongBranch::Accepted { sup_psi, lambda_u } => {
                let _ = writeln!(s, "strong.verdict = accepted\nstrong.sup_psi = {sup_psi:?}\nstrong.lambda = {lambda_u:?}");
            }
            StrongBranch::Rejected(why) => {
                let _ = writeln!(s, "strong.verdict = rejected({why})");
            }
        }
        for e in &self.errors {
            let _ = writeln!(s, "error = {e}");
        }
        let _ = writeln!(s, "verdict = {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

/// Drift and noise conditions, the contraction constants, the Lyapunov
/// inequality for `ψ`, the total-variation test function and the
/// strong-ergodicity branch.
pub fn run_check(s: &Scenario) -> CheckOutcome {
    let q = QuadratureSpec::default();
    let pairs = s.pairs();
    let mut out = CheckOutcome {
        scenario: s.name.clone(),
        reports: Vec::new(),
        constants: None,
        strong: StrongBranch::Rejected("not reached".into()),
        errors: Vec::new(),
    };
    out.reports.push(check_drift_condition(&s.coeffs, &s.modulus, &pairs));
    let noise = check_noise_conditions(&s.coeffs, &s.nu, &s.noise());
    let case = noise.case;
    out.reports.push(noise);
    let Some(case) = case else {
        out.strong = StrongBranch::Rejected("noise conditions do not hold".into());
        return out;
    };
    let k = match derive_constants(case, &s.modulus) {
        Ok(k) => k,
        Err(e) => {
            out.errors.push(format!("constants: {e}"));
            out.strong = StrongBranch::Rejected("no contraction constants".into());
            return out;
        }
    };
    let spec = LyapunovSpec::from_constants(&k);
    out.reports.push(verify_lyapunov(&k.psi, &spec, &s.coeffs, &s.nu, &pairs, &q));

    let (alpha, beta) = tv_exponents(&case);
    let tv_pairs = s.tv_pairs();
    let tv = check_tv_condition(&s.modulus, &case);
    let tv_holds = tv.holds();
    out.reports.push(tv);
    if tv_holds {
        match build_tv_fn(k.psi.clone(), alpha, beta, s.spec.checks.tv_n) {
            Ok(f) => out.reports.push(tv_rate_report(&f, &spec, s, &tv_pairs, &q)),
            Err(e) => out.errors.push(format!("total-variation test function: {e}")),
        }
    }

    out.strong = strong_branch(s, &k, alpha, beta, &tv_pairs, &q, &mut out.reports, &mut out.errors);
    out.constants = Some(k);
    out
}

/// The largest proportional rate of `L̃f_n ≤ −λ f_n` supported by the grid.
fn tv_rate_report(f: &TVTestFunction, spec: &LyapunovSpec, s: &Scenario, pairs: &[(f64, f64)], q: &QuadratureSpec) -> ConditionReport {
    match grid_rate(f, spec, &s.coeffs, &s.nu, pairs, q) {
        Ok(rate) if rate > 0.0 => {
            let mut r = ConditionReport::new("TV-Lyapunov").with_param("grid_rate", rate);
            r.params.push(("n".into(), f.n as f64));
            r
        }
        Ok(rate) => {
            let zero = LyapunovSpec { lambda: 0.0, ..*spec };
            let mut r = verify_lyapunov(f, &zero, &s.coeffs, &s.nu, pairs, q);
            r.id = "TV-Lyapunov".into();
            r.params.push(("grid_rate".into(), rate));
            r
        }
        Err(e) => {
            let mut r = ConditionReport::new("TV-Lyapunov");
            r.verdict = Verdict::FailsAt { x: f64::NAN, y: f64::NAN, margin: f64::INFINITY };
            r.notes.push(e.to_string());
            r
        }
    }
}

/// Bounded test function for `Φ₂` with `∫^∞ 1/Φ₂ < ∞`. The uniform rate is
/// `min{δA, c₁Φ₂(l₀), λ}`: the far-field bounds plus the near-field rate
/// (`f_n ≥ 1` from `1/n` on).
#[allow(clippy::too_many_arguments)]
fn strong_branch(
    s: &Scenario,
    k: &ContractionConstants,
    alpha: f64,
    beta: f64,
    pairs: &[(f64, f64)],
    q: &QuadratureSpec,
    reports: &mut Vec<ConditionReport>,
    errors: &mut Vec<String>,
) -> StrongBranch {
    if k.modulus.phi2.is_none() {
        return StrongBranch::Rejected("no dissipation modulus Phi2".into());
    }
    let diss = check_dissipation_condition(&s.coeffs, &k.modulus, &s.pairs());
    let verdict = diss.verdict.clone();
    reports.push(diss);
    match verdict {
        Verdict::Inapplicable(why) => return StrongBranch::Rejected(why),
        Verdict::FailsAt { .. } => return StrongBranch::Rejected("dissipation condition fails".into()),
        Verdict::HoldsOnGrid => {}
    }
    let psi = match build_strong_psi(k.g().clone(), k.c1, k.c2, &k.modulus, s.spec.checks.delta) {
        Ok(p) => p,
        Err(e) => return StrongBranch::Rejected(e.to_string()),
    };
    let (PsiVariant::StrongErgodic { a, delta, phi2, .. }, Mass::Finite(sup_psi)) = (psi.variant, psi.sup()) else {
        return StrongBranch::Rejected("bounded test function unavailable".into());
    };
    let lambda_u = (delta * a).min(k.c1 * phi2.eval(k.modulus.l0)).min(k.lambda);
    let f = match build_tv_fn(psi, alpha, beta, s.spec.checks.tv_n) {
        Ok(f) => f,
        Err(e) => {
            errors.push(format!("strong test function: {e}"));
            return StrongBranch::Rejected(e.to_string());
        }
    };
    let spec = LyapunovSpec { lambda: lambda_u, mode: LyapunovMode::Uniform, ..LyapunovSpec::from_constants(k) };
    let r = verify_lyapunov(&f, &spec, &s.coeffs, &s.nu, pairs, q);
    let held = r.holds();
    reports.push(r);
    if held {
        StrongBranch::Accepted { sup_psi, lambda_u }
    } else {
        StrongBranch::Rejected("uniform Lyapunov inequality fails on the grid".into())
    }
}

/// Output of the test-function pipeline.
#[derive(Debug, Clone)]
pub struct TestfnOutcome {
    pub constants: ContractionConstants,
    /// `r,psi,psi1,psi2` over `[0, rmax]`.
    pub table: String,
    /// The bounded variant when the strong branch applies.
    pub strong: Option<PsiFunction>,
    pub strong_table: Option<String>,
}

impl TestfnOutcome {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.constants.to_kv() {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "gluing_defect = {}", self.constants.psi.gluing_defect());
        match &self.strong {
            Some(p) => {
                if let PsiVariant::StrongErgodic { a, b, delta, .. } = p.variant {
                    let _ = writeln!(s, "strong.A = {a}\nstrong.B = {b}\nstrong.delta = {delta}");
                }
                if let Mass::Finite(v) = p.sup() {
                    let _ = writeln!(s, "strong.sup_psi = {v:?}");
                }
            }
            None => s.push_str("strong = unavailable\n"),
        }
        s
    }
}

/// `0` followed by `rows − 1` log-spaced points ending at `rmax`.
fn table_grid(rmin: f64, rmax: f64, rows: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_grid(rmin, rmax, rows.max(2) - 1));
    g
}

/// Builds `ψ` (and the bounded variant when `Φ₂` allows it) from the
/// scenario's noise case and tabulates it.
pub fn run_testfn(s: &Scenario) -> Result<TestfnOutcome> {
    let noise = check_noise_conditions(&s.coeffs, &s.nu, &s.noise());
    let case = noise
        .case
        .ok_or_else(|| Error::Precondition(format!("noise conditions: {}", noise.verdict_str())))?;
    let k = derive_constants(case, &s.modulus)?;
    let g = &s.spec.grid;
    let grid = table_grid(g.rmin, g.rmax, s.spec.checks.table_rows);
    let table = k.psi.to_csv(&grid);
    let strong = match k.modulus.phi2 {
        Some(_) if !k.modulus.phi2_tail().is_infinite() => {
            Some(build_strong_psi(k.g().clone(), k.c1, k.c2, &k.modulus, s.spec.checks.delta)?)
        }
        _ => None,
    };
    let strong_table = strong.as_ref().map(|p| p.to_csv(&grid));
    Ok(TestfnOutcome { constants: k, table, strong, strong_table })
}

/// Coupled ensemble from `(x0, y0)` and the distance curve at the checkpoints.
pub fn run_couple(s: &Scenario) -> Result<(CoupledEnsemble, DecayCurve)> {
    let ens = simulate_coupled(&s.coeffs, &s.nu, s.spec.x0, s.spec.y0, &s.spec.sim)?;
    let curve = DecayCurve::from_ensemble(&ens, &s.spec.sim.checkpoints)?;
    Ok((ens, curve))
}

pub fn run_simulate(s: &Scenario) -> Result<PathEnsemble> {
    simulate_single(&s.coeffs, &s.nu, s.spec.x0, &s.spec.sim)
}

/// Long-run summaries from each starting point, with the `W₁` distance
/// between the first and last terminal laws.
pub fn run_invariant(s: &Scenario) -> Result<(Vec<(f64, InvariantSummary, usize)>, Option<f64>)> {
    let inv = &s.spec.invariant;
    let starts = if inv.starts.is_empty() { vec![s.spec.x0] } else { inv.starts.clone() };
    let mut out = Vec::new();
    let mut ens = Vec::new();
    for (i, &x) in starts.iter().enumerate() {
        let cfg = SimConfig { seed: s.spec.sim.seed.wrapping_add(i as u64), ..s.spec.sim.clone() };
        let e = simulate_single(&s.coeffs, &s.nu, x, &cfg)?;
        out.push((x, invariant_summary(&e, inv.burn_in, inv.bins, inv.hi)?, e.failed.len()));
        ens.push(e);
    }
    let dist = match (ens.first(), ens.last()) {
        (Some(a), Some(b)) if ens.len() > 1 => Some(tail_distance(a, b)?),
        _ => None,
    };
    Ok((out, dist))
}

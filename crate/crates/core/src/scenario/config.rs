//! TOML experiment files: named models, jump measures, drift moduli and
//! scenarios that reference them by name.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr;
use crate::generator::{NoiseCase, BASE_POINTS};
use crate::model::{CirDiffusion, CoefficientSet, Density, LevyMeasure};
use crate::simulate::SimConfig;
use crate::testfn::{DriftModulus, Phi1, Phi2};

/// Scenarios shipped with the library.
pub const PRESETS: &str = include_str!("presets.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CirReading {
    #[default]
    Literal,
    Conventional,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Cir {
        b: f64,
        c: f64,
        d: f64,
        #[serde(default)]
        diffusion: CirReading,
    },
    Logistic {
        b1: f64,
        b2: f64,
        #[serde(default)]
        c1: f64,
        #[serde(default)]
        c2: f64,
    },
    GeneralizedLogistic {
        b1: f64,
        b2: f64,
        delta: f64,
        #[serde(default)]
        c1: f64,
        #[serde(default)]
        c2: f64,
    },
    Csbp {
        #[serde(default)]
        a: f64,
        b: f64,
        #[serde(default)]
        c1: f64,
        #[serde(default)]
        c2: f64,
    },
    LogDrift {
        b1: f64,
        b2: f64,
        #[serde(default)]
        c1: f64,
        #[serde(default)]
        c2: f64,
    },
    ExpDrift {
        b1: f64,
        b2: f64,
        c: f64,
        delta: f64,
        #[serde(default)]
        c1: f64,
        #[serde(default)]
        c2: f64,
    },
    /// Expressions in `x`.
    Custom {
        drift: String,
        #[serde(default = "zero_expr")]
        diffusion: String,
        #[serde(default = "zero_expr")]
        branching: String,
    },
}

fn zero_expr() -> String {
    "0".into()
}

impl ModelSpec {
    pub fn build(&self, name: &str) -> Result<CoefficientSet> {
        let c = match self {
            ModelSpec::Cir { b, c, d, diffusion } => {
                let reading = match diffusion {
                    CirReading::Literal => CirDiffusion::Literal,
                    CirReading::Conventional => CirDiffusion::Conventional,
                };
                CoefficientSet::cir(*b, *c, *d, reading)?
            }
            ModelSpec::Logistic { b1, b2, c1, c2 } => CoefficientSet::logistic(*b1, *b2, *c1, *c2)?,
            ModelSpec::GeneralizedLogistic { b1, b2, delta, c1, c2 } => {
                CoefficientSet::generalized_logistic(*b1, *b2, *delta, *c1, *c2)?
            }
            ModelSpec::Csbp { a, b, c1, c2 } => CoefficientSet::csbp(*a, *b, *c1, *c2)?,
            ModelSpec::LogDrift { b1, b2, c1, c2 } => CoefficientSet::log_drift(*b1, *b2, *c1, *c2)?,
            ModelSpec::ExpDrift { b1, b2, c, delta, c1, c2 } => {
                CoefficientSet::exp_drift(*b1, *b2, *c, *delta, *c1, *c2)?
            }
            ModelSpec::Custom { drift, diffusion, branching } => CoefficientSet::new(
                name,
                expr::compile(drift, "x")?,
                expr::compile(diffusion, "x")?,
                expr::compile(branching, "x")?,
            )?,
        };
        Ok(c.renamed(name))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    Zero,
    /// `c0 z^{−1−α}` on `(0, upper]`.
    Stable {
        alpha: f64,
        #[serde(default = "one")]
        c0: f64,
        #[serde(default = "one")]
        upper: f64,
    },
    Dyadic {
        alpha: f64,
        #[serde(default = "default_jmax")]
        jmax: u32,
    },
    /// `[location, mass]` pairs.
    Atomic { atoms: Vec<[f64; 2]> },
    /// Density expression in `z` on `(0, upper]`.
    Density { expr: String, upper: f64 },
}

fn one() -> f64 {
    1.0
}

fn default_jmax() -> u32 {
    200
}

impl MeasureSpec {
    pub fn build(&self) -> Result<LevyMeasure> {
        match self {
            MeasureSpec::Zero => Ok(LevyMeasure::zero()),
            MeasureSpec::Stable { alpha, c0, upper } => LevyMeasure::stable_truncated_upper(*alpha, *c0, *upper),
            MeasureSpec::Dyadic { alpha, jmax } => LevyMeasure::dyadic_atoms(*alpha, *jmax),
            MeasureSpec::Atomic { atoms } => LevyMeasure::atomic(atoms.iter().map(|a| (a[0], a[1]))),
            MeasureSpec::Density { expr: src, upper } => LevyMeasure::absolutely_continuous(Density::Custom {
                f: expr::compile(src, "z")?,
                upper: *upper,
                label: src.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Phi1Spec {
    Zero,
    Linear { k: f64 },
    /// `k r log(4l / r)`.
    LogRatio { k: f64, l: f64 },
    /// `b r log(1 + 1/r)`.
    LogOnePlus { b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Phi2Spec {
    Linear { k: f64 },
    Power { coef: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSpec {
    pub phi1: Phi1Spec,
    #[serde(default)]
    pub phi2: Option<Phi2Spec>,
    pub l0: f64,
    #[serde(default)]
    pub k2: Option<f64>,
}

impl ModulusSpec {
    pub fn build(&self) -> Result<DriftModulus> {
        let phi1 = match self.phi1 {
            Phi1Spec::Zero => Phi1::Zero,
            Phi1Spec::Linear { k } => Phi1::Linear { k },
            Phi1Spec::LogRatio { k, l } => Phi1::LogRatio { k, l },
            Phi1Spec::LogOnePlus { b } => Phi1::LogOnePlus { b },
        };
        let phi2 = self.phi2.map(|p| match p {
            Phi2Spec::Linear { k } => Phi2::Linear { k },
            Phi2Spec::Power { coef, p } => Phi2::Power { coef, p },
        });
        DriftModulus::new(phi1, phi2, self.l0, self.k2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseCaseSpec {
    A1,
    A2,
    Case1,
    Case2,
    Case3,
}

impl From<NoiseCaseSpec> for NoiseCase {
    fn from(c: NoiseCaseSpec) -> Self {
        match c {
            NoiseCaseSpec::A1 => NoiseCase::A1,
            NoiseCaseSpec::A2 => NoiseCase::A2,
            NoiseCaseSpec::Case1 => NoiseCase::Case1,
            NoiseCaseSpec::Case2 => NoiseCase::Case2,
            NoiseCaseSpec::Case3 => NoiseCase::Case3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub case: NoiseCaseSpec,
    #[serde(default = "one")]
    pub kappa: f64,
}

/// Two-point grid `(y + r, y)` used by the grid checks.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub rmin: f64,
    pub rmax: f64,
    pub n: usize,
    pub ys: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { rmin: 1e-3, rmax: 10.0, n: 200, ys: BASE_POINTS.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSpec {
    /// `δ` of the bounded test function.
    pub delta: f64,
    /// Index `n` of the total-variation test function `f_n`.
    pub tv_n: u32,
    /// Rows of the test-function table.
    pub table_rows: usize,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        ChecksSpec { delta: 0.5, tv_n: 10, table_rows: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantSpec {
    /// Starting points; empty means `[x0]`.
    pub starts: Vec<f64>,
    pub burn_in: f64,
    pub bins: usize,
    pub hi: Option<f64>,
}

impl Default for InvariantSpec {
    fn default() -> Self {
        InvariantSpec { starts: Vec::new(), burn_in: 0.5, bins: 50, hi: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub description: String,
    pub model: String,
    #[serde(default = "zero_measure")]
    pub measure: String,
    pub modulus: String,
    pub noise: NoiseSpec,
    pub x0: f64,
    pub y0: f64,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub invariant: InvariantSpec,
}

fn zero_measure() -> String {
    "zero".into()
}

/// A parsed experiment file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub models: BTreeMap<String, ModelSpec>,
    pub measures: BTreeMap<String, MeasureSpec>,
    pub moduli: BTreeMap<String, ModulusSpec>,
    pub scenarios: BTreeMap<String, ScenarioSpec>,
}

impl Config {
    /// Parses a config without resolving names, which may point into the presets.
    pub fn parse(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn presets() -> Self {
        let c = Self::parse(PRESETS).expect("bundled presets parse");
        c.check_references().expect("bundled presets resolve");
        c
    }

    /// The presets with `self`'s entries added on top (same names replace).
    pub fn over_presets(self) -> Result<Self> {
        let mut base = Self::presets();
        base.models.extend(self.models);
        base.measures.extend(self.measures);
        base.moduli.extend(self.moduli);
        base.scenarios.extend(self.scenarios);
        base.check_references()?;
        Ok(base)
    }

    pub fn check_references(&self) -> Result<()> {
        for (name, s) in &self.scenarios {
            let missing = |kind: &str, r: &str| Error::Config(format!("scenario `{name}`: unknown {kind} `{r}`"));
            if !self.models.contains_key(&s.model) {
                return Err(missing("model", &s.model));
            }
            if s.measure != "zero" && !self.measures.contains_key(&s.measure) {
                return Err(missing("measure", &s.measure));
            }
            if !self.moduli.contains_key(&s.modulus) {
                return Err(missing("modulus", &s.modulus));
            }
        }
        Ok(())
    }

    pub fn scenario(&self, name: &str) -> Result<super::Scenario> {
        let spec = self.scenarios.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.scenarios.keys().map(String::as_str).collect();
            Error::Config(format!("unknown scenario `{name}` (known: {})", known.join(", ")))
        })?;
        let ctx = |e: Error| Error::Config(format!("scenario `{name}`: {e}"));
        let coeffs = self.models[&spec.model].build(&spec.model).map_err(ctx)?;
        let nu = match self.measures.get(&spec.measure) {
            Some(m) => m.build().map_err(ctx)?,
            None => LevyMeasure::zero(),
        };
        let modulus = self.moduli[&spec.modulus].build().map_err(ctx)?;
        spec.sim.validate().map_err(ctx)?;
        if !(spec.x0 >= 0.0 && spec.y0 >= 0.0) {
            return Err(ctx(Error::Domain("initial points must be non-negative".into())));
        }
        let g = &spec.grid;
        if !(g.rmin > 0.0 && g.rmax > g.rmin && g.n >= 2) {
            return Err(ctx(Error::Domain("grid needs 0 < rmin < rmax and n >= 2".into())));
        }
        Ok(super::Scenario { name: name.to_string(), spec: spec.clone(), coeffs, nu, modulus })
    }
}

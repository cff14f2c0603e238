//! SDE coefficients and the jump measure, with every measure-level query the
//! coupling and the generator need.

mod coeffs;
mod levy;
mod sampler;

use std::fmt;
use std::sync::Arc;

pub use coeffs::{CirDiffusion, CoefficientSet};
pub use levy::{Atom, Density, LevyMeasure, MeasureKind, OverlapMeasure};
pub use sampler::{Jump, MeasureSampler};

/// Shared real function of one variable.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A measure's total mass, which may legitimately be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mass {
    Finite(f64),
    Infinite,
}

impl Mass {
    pub fn finite(self) -> Option<f64> {
        match self {
            Mass::Finite(m) => Some(m),
            Mass::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Mass::Infinite)
    }
}

impl fmt::Display for Mass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mass::Finite(m) => write!(f, "{m}"),
            Mass::Infinite => f.write_str("inf"),
        }
    }
}

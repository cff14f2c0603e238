//! Simulation and numerical verification of exponential ergodicity for
//! continuous-state nonlinear branching processes
//!
//! `dX = γ₀(X)dt + √γ₁(X) dB + ∫∫ z 1{u ≤ γ₂(X-)} Ñ(ds, dz, du)`.

pub mod error;
pub mod estimate;
pub mod expr;
pub mod model;
pub mod quad;
pub mod scenario;
pub mod simulate;
pub mod generator;
pub mod testfn;

pub use error::{Error, Result};
pub use model::{CoefficientSet, LevyMeasure, Mass, OverlapMeasure};
pub use quad::QuadratureSpec;

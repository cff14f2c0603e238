//! The generator `L`, the coupling operators `L̃` and `L*`, and grid checks
//! of the drift, noise and Lyapunov conditions.

mod conditions;
mod jumps;
mod operators;
mod remarks;
mod report;

pub use conditions::{
    check_dissipation_condition, check_drift_condition, check_noise_conditions, check_tv_condition, dyadic_grid,
    grid_rate, pair_grid, verify_lyapunov, LyapunovMode, LyapunovSpec, NoiseCase, NoiseDescriptor, BASE_POINTS,
};
pub use operators::{
    apply_bivariate_coupling_l, apply_coupling_l, apply_l, apply_synchronous_l, coupling_l_split, Bivariate,
    CouplingKind, DifferenceFn, SumFn,
};
pub use remarks::{cir_expected_hitting_time, invariant_density_residual, invariant_mass_lower_bound, invariant_measure_mass};
pub use report::{ConditionReport, Verdict, Witness};

#[cfg(test)]
mod tests;

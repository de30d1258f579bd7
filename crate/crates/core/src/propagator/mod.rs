//! Time integration of the original and reduced equations and the growth
//! diagnostics built on them.

mod growth;
mod integrator;
mod reduced;

pub use growth::{
    envelope_constants, growth_experiment, interpolation_check, EnvelopeCheck, EnvelopeConstants,
    GrowthOptions, GrowthReport, InterpolationRow, ENVELOPE_ROUNDING, INTERPOLATION_SLACK,
};
pub use integrator::{
    operator_norm, operator_norm_block, propagate, propagator_matrix, propagator_snapshots,
    step_halving, Generator, OperatorFamily, Trajectory, HERMITIAN_TOL, MAX_SAMPLES,
};
pub use reduced::{
    cross_propagation_error, propagate_reduced, to_original, to_reduced, ReducedModel,
};

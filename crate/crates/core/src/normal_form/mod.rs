//! Reduction of `V(t,x)|D|^M + W(t)` to `lambda_K(t,D) + W_K(t)` with
//! `W_K` of order `-K`.

mod homological;
mod problem;
mod pushforward;
mod reduction;

pub use homological::{
    homological_residual, homological_solve, homological_solve_symbol, HomologicalSolution,
};
pub use problem::{
    ebar, k_from_s, n_steps, translate_operator, CheckReport, ProblemSpec, TimeDependence,
    ORDER_SLACK,
};
pub use pushforward::{pushforward, Pushforward};
pub use reduction::{
    conjugation_defect, reduce_at, EvolutionSign, reduce_highest_order, run_reduction, ReductionOptions,
    ReductionResult, ReductionSample, ReductionState, ReductionStep,
};

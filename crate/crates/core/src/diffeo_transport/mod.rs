//! Circle diffeomorphisms straightening the leading coefficient, the
//! transport flow that realizes them as unitary operators, and Egorov-type
//! conjugation checks.

mod diffeo;
mod egorov;
mod flow;

pub use diffeo::{
    compute_alpha_tilde, compute_lambda, invert_displacement, AlphaTilde, DiffeoPair, Potential,
};
pub use egorov::{conjugate, egorov_check, simplified_egorov_check, transported_symbol};
pub use flow::{
    apply_exp_i, b_alpha, b_alpha_x, characteristics, composition_matrix, composition_operator,
    flow_log_derivative, g_flow, time_derivative_flow, transport_flow, transport_flow_at,
    transport_generator, UNITARITY_TOL,
};

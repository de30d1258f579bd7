//! Symbols on the circle, their quantization to Fourier matrices and the
//! symbolic calculus checked against matrix algebra.

mod calculus;
mod matrix;
mod order;
mod symbol;

pub use calculus::{
    adjoint_symbol, compose_exact, compose_expansion, dequantize, inv_derivative_x, poisson_bracket,
    quantize, x_average, x_derivative, xi_derivative,
};
pub use matrix::{exp_i_hermitian, HermitianEigen, OperatorMatrix};
pub use order::{estimate_order, estimate_order_window, OrderFit, MIN_WINDOW_POINTS};
pub use symbol::{Symbol, SymbolFn};

//! Conjugation of operators by flows and the principal-symbol checks.

use std::sync::Arc;

use crate::error::Result;
use crate::pdo_calculus::{
    estimate_order_window, poisson_bracket, quantize, OperatorMatrix, OrderFit, Symbol,
};

use super::diffeo::DiffeoPair;

/// `p0(x, xi) = v(x + tau alpha(x), xi / (1 + tau alpha_x(x)))`.
pub fn transported_symbol(pair: &DiffeoPair, v: &Symbol, tau: f64) -> Symbol {
    let pair = Arc::new(pair.clone());
    let v2 = v.clone();
    Symbol::new(format!("p0[{}]", v.label()), v.order(), move |t, x, xi| {
        let jac = 1.0 + tau * pair.alpha_x_at(x);
        v2.eval(t, x + tau * pair.alpha_at(x), xi / jac)
    })
}

/// `Phi V Phi^dagger` for a unitary flow.
pub fn conjugate(flow: &OperatorMatrix, v: &OperatorMatrix) -> Result<OperatorMatrix> {
    flow.matmul(v)?.matmul(&flow.adjoint())
}

/// Order fit of `flow V flow^{-1} - Op(p0)` over `lo <= |xi| <= hi`.
pub fn egorov_check(
    flow: &OperatorMatrix,
    v: &OperatorMatrix,
    p0: &Symbol,
    lo: i64,
    hi: i64,
) -> Result<OrderFit> {
    let conj = conjugate(flow, v)?;
    let q = quantize(p0, v.time(), v.grid_size())?;
    estimate_order_window(&conj.sub(&q)?, lo, hi, 0.0)
}

/// Order fit of `exp(iG) Op(v) exp(-iG) - Op(v + {g, v})`.
pub fn simplified_egorov_check(
    g_flow: &OperatorMatrix,
    g: &Symbol,
    v: &Symbol,
    t: f64,
    lo: i64,
    hi: i64,
) -> Result<OrderFit> {
    let n = g_flow.grid_size();
    let vm = quantize(v, t, n)?;
    let conj = conjugate(g_flow, &vm)?;
    let expected = v.sum(&poisson_bracket(g, v, n));
    let q = quantize(&expected, t, n)?;
    estimate_order_window(&conj.sub(&q)?, lo, hi, 0.0)
}

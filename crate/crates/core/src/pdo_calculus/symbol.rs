//! Symbols `a(t, x, xi)`: periodic in `x`, smooth in `(t, xi)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::torus_fourier::{in_range, interpolate, mode_index};

use super::matrix::OperatorMatrix;

/// Pointwise evaluator `(t, x, xi) -> value`.
pub type SymbolFn = dyn Fn(f64, f64, f64) -> C64 + Send + Sync;

/// A classical symbol with a declared order and optional analytic
/// first derivatives in `xi` and `x`.
#[derive(Clone)]
pub struct Symbol {
    value: Arc<SymbolFn>,
    d_xi: Option<Arc<SymbolFn>>,
    d_x: Option<Arc<SymbolFn>>,
    order: f64,
    label: String,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("order", &self.order)
            .finish()
    }
}

impl Symbol {
    pub fn new(
        label: impl Into<String>,
        order: f64,
        f: impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(f),
            d_xi: None,
            d_x: None,
            order,
            label: label.into(),
        }
    }

    pub fn with_xi_derivative(
        mut self,
        f: impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        self.d_xi = Some(Arc::new(f));
        self
    }

    pub fn with_x_derivative(
        mut self,
        f: impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        self.d_x = Some(Arc::new(f));
        self
    }

    pub fn zero() -> Self {
        Self::new("0", f64::NEG_INFINITY, |_, _, _| C64::new(0.0, 0.0))
            .with_xi_derivative(|_, _, _| C64::new(0.0, 0.0))
            .with_x_derivative(|_, _, _| C64::new(0.0, 0.0))
    }

    /// `x`-independent symbol `m(t, xi)`.
    pub fn multiplier(
        label: impl Into<String>,
        order: f64,
        m: impl Fn(f64, f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, order, move |t, _, xi| m(t, xi))
            .with_x_derivative(|_, _, _| C64::new(0.0, 0.0))
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, xi: f64) -> C64 {
        (self.value)(t, x, xi)
    }

    /// Evaluation that reports non-finite values.
    pub fn eval_checked(&self, t: f64, x: f64, xi: f64) -> Result<C64> {
        let v = self.eval(t, x, xi);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { t, x, xi })
        }
    }

    pub fn analytic_xi_derivative(&self) -> Option<&Arc<SymbolFn>> {
        self.d_xi.as_ref()
    }

    pub fn analytic_x_derivative(&self) -> Option<&Arc<SymbolFn>> {
        self.d_x.as_ref()
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order = order;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `c a`.
    pub fn scaled(&self, c: C64) -> Self {
        let f = self.value.clone();
        let mut out = Self::new(format!("({c})*{}", self.label), self.order, move |t, x, xi| {
            c * f(t, x, xi)
        });
        if let Some(d) = self.d_xi.clone() {
            out = out.with_xi_derivative(move |t, x, xi| c * d(t, x, xi));
        }
        if let Some(d) = self.d_x.clone() {
            out = out.with_x_derivative(move |t, x, xi| c * d(t, x, xi));
        }
        out
    }

    /// `a + b`.
    pub fn sum(&self, other: &Symbol) -> Self {
        self.combine(other, 1.0)
    }

    /// `a - b`.
    pub fn difference(&self, other: &Symbol) -> Self {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Symbol, sign: f64) -> Self {
        let (f, g) = (self.value.clone(), other.value.clone());
        let op = if sign > 0.0 { "+" } else { "-" };
        let mut out = Self::new(
            format!("{}{op}{}", self.label, other.label),
            self.order.max(other.order),
            move |t, x, xi| f(t, x, xi) + sign * g(t, x, xi),
        );
        if let (Some(a), Some(b)) = (self.d_xi.clone(), other.d_xi.clone()) {
            out = out.with_xi_derivative(move |t, x, xi| a(t, x, xi) + sign * b(t, x, xi));
        }
        if let (Some(a), Some(b)) = (self.d_x.clone(), other.d_x.clone()) {
            out = out.with_x_derivative(move |t, x, xi| a(t, x, xi) + sign * b(t, x, xi));
        }
        out
    }

    /// Pointwise product `a b` (not the operator composition).
    pub fn product(&self, other: &Symbol) -> Self {
        let (f, g) = (self.value.clone(), other.value.clone());
        let mut out = Self::new(
            format!("({})*({})", self.label, other.label),
            self.order + other.order,
            {
                let (f, g) = (f.clone(), g.clone());
                move |t, x, xi| f(t, x, xi) * g(t, x, xi)
            },
        );
        if let (Some(a), Some(b)) = (self.d_xi.clone(), other.d_xi.clone()) {
            let (f, g) = (f.clone(), g.clone());
            out = out.with_xi_derivative(move |t, x, xi| {
                a(t, x, xi) * g(t, x, xi) + f(t, x, xi) * b(t, x, xi)
            });
        }
        if let (Some(a), Some(b)) = (self.d_x.clone(), other.d_x.clone()) {
            out = out.with_x_derivative(move |t, x, xi| {
                a(t, x, xi) * g(t, x, xi) + f(t, x, xi) * b(t, x, xi)
            });
        }
        out
    }

    /// Symbol read back from an operator matrix: at integer `xi` it is
    /// `sum_k A[xi+k, xi] e^{ikx}`; between integers it is interpolated
    /// linearly and it vanishes outside the truncated range.
    pub fn from_matrix(label: impl Into<String>, order: f64, a: &OperatorMatrix) -> Self {
        let n = a.grid_size();
        // Column-wise x-coefficients in centered order.
        let columns: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let xi = crate::torus_fourier::index_mode(n, j);
                let mut c = vec![C64::new(0.0, 0.0); n];
                for (idx, ck) in c.iter_mut().enumerate() {
                    let k = crate::torus_fourier::index_mode(n, idx);
                    *ck = a.get(xi + k, xi);
                }
                c
            })
            .collect();
        let columns = Arc::new(columns);
        let column_value = move |x: f64, xi: i64| -> C64 {
            if in_range(n, xi) {
                interpolate(&columns[mode_index(n, xi)], x)
            } else {
                C64::new(0.0, 0.0)
            }
        };
        Self::new(label, order, move |_, x, xi| {
            let lo = xi.floor();
            let frac = xi - lo;
            let lo = lo as i64;
            if frac == 0.0 {
                column_value(x, lo)
            } else {
                column_value(x, lo) * (1.0 - frac) + column_value(x, lo + 1) * frac
            }
        })
    }
}

//! Quantization and the symbolic calculus: exact composition, asymptotic
//! expansion, adjoint, Poisson bracket, x-average and x-antiderivative.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::torus_fourier::{
    check_grid_size, forward_coefficients, in_range, index_mode, mode_index, nodes,
};

use super::matrix::OperatorMatrix;
use super::symbol::Symbol;

const ZERO: C64 = C64::new(0.0, 0.0);
const CACHE_LIMIT: usize = 1 << 15;

/// Memoized x-Fourier coefficients `a_hat(t, ., xi)` of a symbol, with the
/// unpaired `-N/2` coefficient removed.
struct XCoefficients {
    symbol: Symbol,
    n: usize,
    nodes: Vec<f64>,
    cache: Mutex<HashMap<(u64, u64), Arc<Vec<C64>>>>,
}

impl XCoefficients {
    fn new(symbol: Symbol, n: usize) -> Self {
        Self {
            symbol,
            n,
            nodes: nodes(n),
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn get(&self, t: f64, xi: f64) -> Arc<Vec<C64>> {
        let key = (t.to_bits(), xi.to_bits());
        if let Some(v) = self.cache.lock().expect("cache poisoned").get(&key) {
            return v.clone();
        }
        let samples: Vec<C64> = self.nodes.iter().map(|&x| self.symbol.eval(t, x, xi)).collect();
        let mut c = forward_coefficients(&samples);
        c[0] = ZERO;
        let c = Arc::new(c);
        let mut cache = self.cache.lock().expect("cache poisoned");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, c.clone());
        c
    }
}

/// `sum_k m(k) c_k e^{ikx}` over centered coefficients.
fn synthesize(coeffs: &[C64], x: f64, m: impl Fn(i64) -> C64) -> C64 {
    let n = coeffs.len();
    let h = (n / 2) as i64;
    let step = C64::from_polar(1.0, x);
    let mut pos = C64::new(1.0, 0.0);
    let mut acc = coeffs[mode_index(n, 0)] * m(0);
    for k in 1..h {
        pos *= step;
        let (cp, cn) = (coeffs[mode_index(n, k)], coeffs[mode_index(n, -k)]);
        if cp != ZERO {
            acc += cp * m(k) * pos;
        }
        if cn != ZERO {
            acc += cn * m(-k) * pos.conj();
        }
    }
    acc
}

/// Matrix of `Op(a)` at time `t`: entry `(eta, xi)` is the x-Fourier
/// coefficient `a_hat(t, eta - xi, xi)`, kept only for `|eta - xi| < N/2`.
pub fn quantize(a: &Symbol, t: f64, n: usize) -> Result<OperatorMatrix> {
    check_grid_size(n)?;
    let xs = nodes(n);
    let h = (n / 2) as i64;
    let mut out = OperatorMatrix::zeros(n, t);
    let mut samples = vec![ZERO; n];
    for j in 0..n {
        let xi = index_mode(n, j);
        for (s, &x) in samples.iter_mut().zip(&xs) {
            *s = a.eval_checked(t, x, xi as f64)?;
        }
        let c = forward_coefficients(&samples);
        for k in (1 - h)..h {
            let eta = xi + k;
            if in_range(n, eta) {
                out.set(eta, xi, c[mode_index(n, k)]);
            }
        }
    }
    Ok(out)
}

/// Symbol read back from a matrix; see [`Symbol::from_matrix`].
pub fn dequantize(a: &OperatorMatrix) -> Symbol {
    Symbol::from_matrix("dequantized", f64::NAN, a)
}

/// Symbol of `Op(a) Op(b)`:
/// `sigma(x, xi) = sum_eta a(x, xi + eta) b_hat(eta, xi) e^{i eta x}`.
pub fn compose_exact(a: &Symbol, b: &Symbol, n: usize) -> Symbol {
    let bc = XCoefficients::new(b.clone(), n);
    let a = a.clone();
    let order = a.order() + b.order();
    let label = format!("({})#({})", a.label(), b.label());
    Symbol::new(label, order, move |t, x, xi| {
        let c = bc.get(t, xi);
        let h = (bc.n / 2) as i64;
        let mut acc = ZERO;
        for k in (1 - h)..h {
            let bk = c[mode_index(bc.n, k)];
            if bk != ZERO {
                acc += a.eval(t, x, xi + k as f64) * bk * C64::from_polar(1.0, k as f64 * x);
            }
        }
        acc
    })
}

/// Finite-difference stencil for the `beta`-th derivative in `xi` with unit
/// step: powers of the second difference, times one central first
/// difference when `beta` is odd.
fn xi_stencil(beta: usize) -> Vec<(i64, f64)> {
    let mut st: Vec<(i64, f64)> = vec![(0, 1.0)];
    let conv = |a: &[(i64, f64)], b: &[(i64, f64)]| {
        let mut m: std::collections::BTreeMap<i64, f64> = Default::default();
        for &(i, u) in a {
            for &(j, v) in b {
                *m.entry(i + j).or_insert(0.0) += u * v;
            }
        }
        m.into_iter().collect::<Vec<_>>()
    };
    let d2 = [(-1, 1.0), (0, -2.0), (1, 1.0)];
    for _ in 0..beta / 2 {
        st = conv(&st, &d2);
    }
    if beta % 2 == 1 {
        st = conv(&st, &[(-1, -0.5), (1, 0.5)]);
    }
    st
}

/// `beta`-th xi-derivative; analytic for `beta = 1` when available.
pub fn xi_derivative(a: &Symbol, beta: usize) -> Symbol {
    let label = format!("d_xi^{beta}({})", a.label());
    let order = a.order() - beta as f64;
    if beta == 0 {
        return a.clone();
    }
    if beta == 1 {
        if let Some(d) = a.analytic_xi_derivative() {
            let d = d.clone();
            return Symbol::new(label, order, move |t, x, xi| d(t, x, xi));
        }
    }
    let st = xi_stencil(beta);
    let a = a.clone();
    Symbol::new(label, order, move |t, x, xi| {
        st.iter()
            .map(|&(o, w)| a.eval(t, x, xi + o as f64) * w)
            .sum()
    })
}

/// `beta`-th x-derivative, spectral on the `n`-point grid (analytic for
/// `beta = 1` when available).
pub fn x_derivative(a: &Symbol, beta: usize, n: usize) -> Symbol {
    let label = format!("d_x^{beta}({})", a.label());
    if beta == 0 {
        return a.clone();
    }
    if beta == 1 {
        if let Some(d) = a.analytic_x_derivative() {
            let d = d.clone();
            return Symbol::new(label, a.order(), move |t, x, xi| d(t, x, xi));
        }
    }
    let ac = XCoefficients::new(a.clone(), n);
    Symbol::new(label, a.order(), move |t, x, xi| {
        let c = ac.get(t, xi);
        synthesize(&c, x, |k| C64::new(0.0, k as f64).powu(beta as u32))
    })
}

/// Truncated expansion `sum_{beta < n_terms} (1/(i^beta beta!)) d_xi^beta a d_x^beta b`
/// and the remainder `compose_exact(a, b) - expansion`.
pub fn compose_expansion(a: &Symbol, b: &Symbol, n_terms: usize, n: usize) -> (Symbol, Symbol) {
    let mut terms: Vec<(C64, Symbol, Symbol)> = Vec::with_capacity(n_terms);
    let mut fact = 1.0;
    for beta in 0..n_terms {
        if beta > 0 {
            fact *= beta as f64;
        }
        let coef = C64::new(0.0, -1.0).powu(beta as u32) / fact;
        terms.push((coef, xi_derivative(a, beta), x_derivative(b, beta, n)));
    }
    let order = a.order() + b.order();
    let label = format!("expand{n_terms}({},{})", a.label(), b.label());
    let expansion = Symbol::new(label, order, move |t, x, xi| {
        terms
            .iter()
            .map(|(c, da, db)| c * da.eval(t, x, xi) * db.eval(t, x, xi))
            .sum()
    });
    let exact = compose_exact(a, b, n);
    let remainder = exact
        .difference(&expansion)
        .with_order(order - n_terms as f64)
        .with_label(format!("remainder{n_terms}({},{})", a.label(), b.label()));
    (expansion, remainder)
}

/// Symbol of `Op(a)^dagger`:
/// `a*(x, xi) = conj(sum_eta a_hat(eta, xi - eta) e^{i eta x})`.
pub fn adjoint_symbol(a: &Symbol, n: usize) -> Symbol {
    let ac = XCoefficients::new(a.clone(), n);
    let label = format!("({})*", a.label());
    Symbol::new(label, a.order(), move |t, x, xi| {
        let h = (ac.n / 2) as i64;
        let mut acc = ZERO;
        for k in (1 - h)..h {
            let c = ac.get(t, xi - k as f64);
            let v = c[mode_index(ac.n, k)];
            if v != ZERO {
                acc += v * C64::from_polar(1.0, k as f64 * x);
            }
        }
        acc.conj()
    })
}

/// `{a, b} = d_xi a d_x b - d_x a d_xi b`.
pub fn poisson_bracket(a: &Symbol, b: &Symbol, n: usize) -> Symbol {
    let (a_xi, a_x) = (xi_derivative(a, 1), x_derivative(a, 1, n));
    let (b_xi, b_x) = (xi_derivative(b, 1), x_derivative(b, 1, n));
    let label = format!("{{{},{}}}", a.label(), b.label());
    Symbol::new(label, a.order() + b.order() - 1.0, move |t, x, xi| {
        a_xi.eval(t, x, xi) * b_x.eval(t, x, xi) - a_x.eval(t, x, xi) * b_xi.eval(t, x, xi)
    })
}

/// x-average `(1/N) sum_j a(t, x_j, xi)`.
pub fn x_average(a: &Symbol, n: usize) -> Symbol {
    let xs = nodes(n);
    let a2 = a.clone();
    let mut out = Symbol::multiplier(format!("<{}>", a.label()), a.order(), move |t, xi| {
        xs.iter().map(|&x| a2.eval(t, x, xi)).sum::<C64>() / n as f64
    });
    if let Some(d) = a.analytic_xi_derivative() {
        let d = d.clone();
        let xs = nodes(n);
        out = out.with_xi_derivative(move |t, _, xi| {
            xs.iter().map(|&x| d(t, x, xi)).sum::<C64>() / n as f64
        });
    }
    out
}

/// Zero-mean x-antiderivative: mode 0 dropped, mode k divided by `ik`.
pub fn inv_derivative_x(a: &Symbol, n: usize) -> Symbol {
    let ac = XCoefficients::new(a.clone(), n);
    Symbol::new(format!("dx^-1({})", a.label()), a.order(), move |t, x, xi| {
        let c = ac.get(t, xi);
        synthesize(&c, x, |k| {
            if k == 0 {
                ZERO
            } else {
                C64::new(0.0, -1.0 / k as f64)
            }
        })
    })
}

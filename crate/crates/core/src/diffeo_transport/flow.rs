//! Transport flow generated by the diffeomorphism, its characteristics,
//! exponential flows of Hermitian generators and finite-difference time
//! derivatives of flows.

use num_complex::Complex64 as C64;

use crate::error::{Error, Hypothesis, Result};
use crate::pdo_calculus::{exp_i_hermitian, HermitianEigen, OperatorMatrix};
use crate::torus_fourier::{
    forward_coefficients, in_range, index_mode, interpolate, mode_index, nodes, GridFunction,
};

use super::diffeo::DiffeoPair;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Unitarity tolerance below which a computed flow is accepted.
pub const UNITARITY_TOL: f64 = 1e-6;

/// `b_alpha(tau; x) = -alpha(x) / (1 + tau alpha_x(x))`.
pub fn b_alpha(pair: &DiffeoPair, tau: f64, x: f64) -> Result<f64> {
    let den = 1.0 + tau * pair.alpha_x_at(x);
    if !(den > 0.0) {
        return Err(Error::hypothesis(
            Hypothesis::H2,
            format!("1 + tau alpha_x = {den} is not positive at x={x}, tau={tau}"),
        ));
    }
    Ok(-pair.alpha_at(x) / den)
}

/// `x`-derivative of [`b_alpha`].
pub fn b_alpha_x(pair: &DiffeoPair, tau: f64, x: f64) -> Result<f64> {
    let (a, ax, axx) = (pair.alpha_at(x), pair.alpha_x_at(x), pair.alpha_xx_at(x));
    let den = 1.0 + tau * ax;
    if !(den > 0.0) {
        return Err(Error::hypothesis(
            Hypothesis::H2,
            format!("1 + tau alpha_x = {den} is not positive at x={x}, tau={tau}"),
        ));
    }
    Ok(-(ax * den - a * tau * axx) / (den * den))
}

/// Flow of the characteristic system from `tau0` to `tau1` by classical
/// Runge-Kutta with `steps` steps. The system is oriented so that
/// `(tau0, 0)` maps `(x, xi)` to `(x + tau0 alpha(x), xi / (1 + tau0 alpha_x(x)))`.
pub fn characteristics(
    pair: &DiffeoPair,
    tau0: f64,
    tau1: f64,
    x: f64,
    xi: f64,
    steps: usize,
) -> Result<(f64, f64)> {
    let steps = steps.max(1);
    let h = (tau1 - tau0) / steps as f64;
    let rhs = |tau: f64, x: f64, xi: f64| -> Result<(f64, f64)> {
        Ok((b_alpha(pair, tau, x)?, -b_alpha_x(pair, tau, x)? * xi))
    };
    let (mut x, mut xi) = (x, xi);
    for s in 0..steps {
        let tau = tau0 + s as f64 * h;
        let k1 = rhs(tau, x, xi)?;
        let k2 = rhs(tau + 0.5 * h, x + 0.5 * h * k1.0, xi + 0.5 * h * k1.1)?;
        let k3 = rhs(tau + 0.5 * h, x + 0.5 * h * k2.0, xi + 0.5 * h * k2.1)?;
        let k4 = rhs(tau + h, x + h * k3.0, xi + h * k3.1)?;
        x += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        xi += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !x.is_finite() || !xi.is_finite() {
            return Err(Error::Numerical(format!(
                "characteristic integration produced a non-finite value at tau={tau}"
            )));
        }
    }
    Ok((x, xi))
}

/// Matrix of the transport generator at `tau`: velocity `c = -b_alpha`,
/// operator `c d_x + c_x / 2`, entry `(eta, xi) = i c_hat(eta - xi) (eta + xi) / 2`.
/// It is skew-Hermitian exactly.
pub fn transport_generator(pair: &DiffeoPair, tau: f64) -> Result<OperatorMatrix> {
    let n = pair.grid_size();
    let mut c = Vec::with_capacity(n);
    for x in nodes(n) {
        c.push(C64::new(-b_alpha(pair, tau, x)?, 0.0));
    }
    let mut ch = forward_coefficients(&c);
    ch[0] = ZERO;
    // real velocity: enforce conjugate symmetry of the coefficients exactly
    let h = (n / 2) as i64;
    for k in 1..h {
        let (p, q) = (ch[mode_index(n, k)], ch[mode_index(n, -k)]);
        let avg = (p + q.conj()) * 0.5;
        ch[mode_index(n, k)] = avg;
        ch[mode_index(n, -k)] = avg.conj();
    }
    ch[mode_index(n, 0)] = C64::new(ch[mode_index(n, 0)].re, 0.0);
    Ok(OperatorMatrix::from_modes(n, pair.time(), |eta, xi| {
        let k = eta - xi;
        if k.abs() < h {
            C64::new(0.0, 0.5 * (eta + xi) as f64) * ch[mode_index(n, k)]
        } else {
            ZERO
        }
    }))
}

/// Flow `Phi(tau)` of `d_tau Phi = A(tau) Phi`, `Phi(0) = I`, by `substeps`
/// midpoint-exponential steps.
pub fn transport_flow_at(pair: &DiffeoPair, tau: f64, substeps: usize) -> Result<OperatorMatrix> {
    let n = pair.grid_size();
    if pair.is_identity() || tau == 0.0 {
        return Ok(OperatorMatrix::identity(n, pair.time()));
    }
    let substeps = substeps.max(1);
    let h = tau / substeps as f64;
    let mut phi = OperatorMatrix::identity(n, pair.time());
    for s in 0..substeps {
        let mid = (s as f64 + 0.5) * h;
        // exp(h A) = exp(i H) with H = -i h A Hermitian
        let gen = transport_generator(pair, mid)?.scale(C64::new(0.0, -h));
        let step = exp_i_hermitian(&gen, 1.0)?;
        phi = step.matmul(&phi)?;
    }
    let res = phi.unitarity_residual();
    if res > UNITARITY_TOL {
        return Err(Error::Numerical(format!(
            "transport flow lost unitarity: residual {res:.3e} (raise substeps or N)"
        )));
    }
    Ok(phi)
}

/// `Phi(1)`.
pub fn transport_flow(pair: &DiffeoPair, substeps: usize) -> Result<OperatorMatrix> {
    transport_flow_at(pair, 1.0, substeps)
}

/// Applies `u -> (1 + tau alpha_x)^{1/2} u(x + tau alpha(x))` on grid samples,
/// with `u` evaluated off-grid by trigonometric interpolation.
pub fn composition_operator(pair: &DiffeoPair, tau: f64, u: &GridFunction) -> Result<GridFunction> {
    let n = pair.grid_size();
    if u.grid_size() != n {
        return Err(Error::Dimension(format!(
            "grid function of size {} on diffeomorphism of size {n}",
            u.grid_size()
        )));
    }
    let uc = forward_coefficients(u.samples());
    let ax = pair.alpha_x();
    let mut out = Vec::with_capacity(n);
    for (j, x) in nodes(n).into_iter().enumerate() {
        let jac = 1.0 + tau * ax[j];
        if !(jac > 0.0) {
            return Err(Error::hypothesis(Hypothesis::H2, "non-positive Jacobian"));
        }
        out.push(interpolate(&uc, x + tau * pair.alpha()[j]) * jac.sqrt());
    }
    GridFunction::new(out)
}

/// Fourier matrix of the composition operator: column `xi` is the spectrum
/// of `(1 + tau alpha_x)^{1/2} e^{i xi (x + tau alpha(x))}`.
pub fn composition_matrix(pair: &DiffeoPair, tau: f64) -> Result<OperatorMatrix> {
    let n = pair.grid_size();
    let ax = pair.alpha_x();
    let xs = nodes(n);
    let mut m = OperatorMatrix::zeros(n, pair.time());
    for j in 0..n {
        let xi = index_mode(n, j) as f64;
        let col: Vec<C64> = (0..n)
            .map(|i| {
                let jac = (1.0 + tau * ax[i]).sqrt();
                C64::from_polar(jac, xi * (xs[i] + tau * pair.alpha()[i]))
            })
            .collect();
        let c = forward_coefficients(&col);
        for (idx, v) in c.into_iter().enumerate() {
            let eta = index_mode(n, idx);
            if in_range(n, eta) && idx != 0 {
                m.mat_mut()[(idx, j)] = v;
            }
        }
    }
    Ok(m)
}

/// `exp(i tau G)` for Hermitian `G`.
pub fn g_flow(g: &OperatorMatrix, tau: f64) -> Result<OperatorMatrix> {
    exp_i_hermitian(g, tau)
}

/// Central difference `Phi(t) (Phi(t+h)^{-1} - Phi(t-h)^{-1}) / (2h)` for
/// unitary flows, i.e. `Phi d_t(Phi^{-1})`.
pub fn flow_log_derivative(
    before: &OperatorMatrix,
    at: &OperatorMatrix,
    after: &OperatorMatrix,
    h: f64,
) -> Result<OperatorMatrix> {
    let d = after.adjoint().sub(&before.adjoint())?;
    Ok(at.matmul(&d)?.scale(C64::new(0.5 / h, 0.0)))
}

/// `Psi(t) = Phi(1; t) d_t(Phi(1; t)^{-1})` by a central difference of step
/// `h_t`; `pair_at` builds the diffeomorphism at a given time.
pub fn time_derivative_flow(
    pair_at: &dyn Fn(f64) -> Result<DiffeoPair>,
    t: f64,
    h_t: f64,
    substeps: usize,
) -> Result<OperatorMatrix> {
    if !(h_t > 0.0) {
        return Err(Error::Contract(format!("time step h_t = {h_t} must be positive")));
    }
    let before = transport_flow(&pair_at(t - h_t)?, substeps)?;
    let at = transport_flow(&pair_at(t)?, substeps)?;
    let after = transport_flow(&pair_at(t + h_t)?, substeps)?;
    Ok(flow_log_derivative(&before, &at, &after, h_t)?.with_time(t))
}

/// Applies `exp(i tau H) v` for Hermitian `H` without forming the exponential.
pub fn apply_exp_i(h: &OperatorMatrix, tau: f64, v: &[C64]) -> Result<Vec<C64>> {
    if h.max_abs() == 0.0 {
        return Ok(v.to_vec());
    }
    let eig = HermitianEigen::new(h, 1e-10)?;
    Ok(eig.apply_function(v, |l| C64::from_polar(1.0, tau * l)))
}

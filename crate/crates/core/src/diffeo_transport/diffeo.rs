//! The leading coefficient, the averaged constant `lambda(t)` and the
//! circle diffeomorphism that straightens it.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Hypothesis, Result};
use crate::torus_fourier::{
    antiderivative_real, apply_multiplier, check_grid_size, derivative_real, forward_coefficients,
    interpolate_real, inverse_coefficients, nodes,
};

/// Real coefficient `V(t, x)` of the leading term.
#[derive(Clone)]
pub struct Potential {
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    autonomous: bool,
    label: String,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential")
            .field("label", &self.label)
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl Potential {
    pub fn new(
        label: impl Into<String>,
        autonomous: bool,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            autonomous,
            label: label.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), true, move |_, _| c)
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn samples(&self, t: f64, n: usize) -> Vec<f64> {
        nodes(n).into_iter().map(|x| self.eval(t, x)).collect()
    }

    /// Smallest value over an `n`-point grid; fails unless finite and positive.
    pub fn check_positive(&self, t: f64, n: usize) -> Result<f64> {
        let s = self.samples(t, n);
        let mut inf = f64::INFINITY;
        for (x, v) in nodes(n).into_iter().zip(&s) {
            if !v.is_finite() {
                return Err(Error::Evaluation { t, x, xi: f64::NAN });
            }
            if *v <= 0.0 {
                return Err(Error::hypothesis(
                    Hypothesis::H2,
                    format!("V(t={t}, x={x:.6}) = {v} is not positive"),
                ));
            }
            inf = inf.min(*v);
        }
        Ok(inf)
    }
}

/// `lambda(t) = ((1/2pi) int V(t,y)^{-1/M} dy)^{-M}` by the trapezoidal rule.
pub fn compute_lambda(v: &Potential, t: f64, m: f64, n: usize) -> Result<f64> {
    check_grid_size(n)?;
    v.check_positive(t, n)?;
    let mean = v
        .samples(t, n)
        .iter()
        .map(|&s| s.powf(-1.0 / m))
        .sum::<f64>()
        / n as f64;
    Ok(mean.powf(-m))
}

/// Displacement `alpha_tilde` solving `V (1 + alpha_tilde_y)^M = lambda`.
#[derive(Debug, Clone)]
pub struct AlphaTilde {
    pub lambda: f64,
    pub alpha_tilde: Vec<f64>,
    pub alpha_tilde_y: Vec<f64>,
    /// `max_y |V (1 + alpha_tilde_y)^M - lambda|`.
    pub residual: f64,
}

pub fn compute_alpha_tilde(v: &Potential, t: f64, m: f64, n: usize) -> Result<AlphaTilde> {
    let lambda = compute_lambda(v, t, m, n)?;
    let vs = v.samples(t, n);
    let rhs: Vec<f64> = vs
        .iter()
        .map(|&s| lambda.powf(1.0 / m) * s.powf(-1.0 / m) - 1.0)
        .collect();
    let alpha_tilde = antiderivative_real(&rhs);
    let alpha_tilde_y = derivative_real(&alpha_tilde);
    let residual = vs
        .iter()
        .zip(&alpha_tilde_y)
        .map(|(&s, &d)| (s * (1.0 + d).powf(m) - lambda).abs())
        .fold(0.0, f64::max);
    Ok(AlphaTilde {
        lambda,
        alpha_tilde,
        alpha_tilde_y,
        residual,
    })
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// Given samples of a displacement `d` with `1 + d' > 0`, returns samples of
/// the displacement `e` of the inverse map: `x + e(x) = y` where
/// `y + d(y) = x`. Newton's method on the trigonometric interpolant of `d`,
/// safeguarded by bisection.
pub fn invert_displacement(d: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    check_grid_size(n)?;
    let dc: Vec<C64> = d.iter().map(|&v| C64::new(v, 0.0)).collect();
    let coeffs = forward_coefficients(&dc);
    let mut dcoeffs = coeffs.clone();
    apply_multiplier(&mut dcoeffs, true, |k| C64::new(0.0, k as f64));
    // the interpolant can exceed the sample maximum between nodes
    let slope_max = inverse_coefficients(&dcoeffs)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.re.abs()));
    let radius = d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        + 2.0 * std::f64::consts::PI / n as f64 * slope_max
        + 1e-9;
    let mut worst = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for x in nodes(n) {
        let f = |y: f64| y + interpolate_real(&coeffs, y) - x;
        let df = |y: f64| 1.0 + interpolate_real(&dcoeffs, y);
        let (mut lo, mut hi) = (x - radius, x + radius);
        let mut y = x - interpolate_real(&coeffs, x);
        let mut fy = f(y);
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            if fy.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
            if fy < 0.0 {
                lo = lo.max(y);
            } else {
                hi = hi.min(y);
            }
            let slope = df(y);
            let mut next = y - fy / slope;
            if !(slope > 0.0) || !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            y = next;
            fy = f(y);
        }
        if !converged {
            worst = worst.max(fy.abs());
            if fy.abs() > NEWTON_TOL {
                return Err(Error::Numerical(format!(
                    "diffeomorphism inversion did not converge at x={x:.6}: residual {worst:.3e}"
                )));
            }
        }
        // one polishing step at full precision
        let slope = df(y);
        if slope > 0.0 {
            let polished = y - fy / slope;
            if f(polished).abs() <= fy.abs() {
                y = polished;
            }
        }
        out.push(y - x);
    }
    Ok(out)
}

/// A circle diffeomorphism `x -> x + alpha(x)` together with its inverse
/// `y -> y + alpha_tilde(y)`, both sampled on the grid.
#[derive(Debug, Clone)]
pub struct DiffeoPair {
    t: f64,
    alpha: Vec<f64>,
    alpha_tilde: Vec<f64>,
    alpha_c: Vec<C64>,
    alpha_x_c: Vec<C64>,
    alpha_xx_c: Vec<C64>,
    alpha_tilde_c: Vec<C64>,
    alpha_tilde_y_c: Vec<C64>,
    jac_min: f64,
}

fn real_coeffs(v: &[f64]) -> Vec<C64> {
    forward_coefficients(&v.iter().map(|&s| C64::new(s, 0.0)).collect::<Vec<_>>())
}

fn derivative_coeffs(c: &[C64]) -> Vec<C64> {
    let mut d = c.to_vec();
    apply_multiplier(&mut d, true, |k| C64::new(0.0, k as f64));
    d
}

impl DiffeoPair {
    fn assemble(t: f64, alpha: Vec<f64>, alpha_tilde: Vec<f64>) -> Result<Self> {
        let alpha_c = real_coeffs(&alpha);
        let alpha_x_c = derivative_coeffs(&alpha_c);
        let alpha_xx_c = derivative_coeffs(&alpha_x_c);
        let alpha_tilde_c = real_coeffs(&alpha_tilde);
        let alpha_tilde_y_c = derivative_coeffs(&alpha_tilde_c);
        let ax = derivative_real(&alpha);
        let aty = derivative_real(&alpha_tilde);
        let jac_min = ax
            .iter()
            .chain(&aty)
            .map(|d| 1.0 + d)
            .fold(f64::INFINITY, f64::min);
        if !(jac_min > 0.0) {
            return Err(Error::hypothesis(
                Hypothesis::H2,
                format!("diffeomorphism Jacobian is not positive (min {jac_min:.3e})"),
            ));
        }
        Ok(Self {
            t,
            alpha,
            alpha_tilde,
            alpha_c,
            alpha_x_c,
            alpha_xx_c,
            alpha_tilde_c,
            alpha_tilde_y_c,
            jac_min,
        })
    }

    /// Builds the pair from the inverse displacement `alpha_tilde`.
    pub fn from_alpha_tilde(alpha_tilde: Vec<f64>, t: f64) -> Result<Self> {
        let dy = derivative_real(&alpha_tilde);
        if let Some(v) = dy.iter().find(|&&d| !(1.0 + d > 0.0)) {
            return Err(Error::hypothesis(
                Hypothesis::H2,
                format!("1 + alpha_tilde_y = {} is not positive", 1.0 + v),
            ));
        }
        let alpha = invert_displacement(&alpha_tilde)?;
        Self::assemble(t, alpha, alpha_tilde)
    }

    /// Builds the pair from the forward displacement `alpha`.
    pub fn from_alpha(alpha: Vec<f64>, t: f64) -> Result<Self> {
        let dx = derivative_real(&alpha);
        if let Some(v) = dx.iter().find(|&&d| !(1.0 + d > 0.0)) {
            return Err(Error::hypothesis(
                Hypothesis::H2,
                format!("1 + alpha_x = {} is not positive", 1.0 + v),
            ));
        }
        let alpha_tilde = invert_displacement(&alpha)?;
        Self::assemble(t, alpha, alpha_tilde)
    }

    /// The straightening diffeomorphism of `V(t, .)`; returns it with `lambda(t)`.
    pub fn from_potential(v: &Potential, t: f64, m: f64, n: usize) -> Result<(Self, f64)> {
        let at = compute_alpha_tilde(v, t, m, n)?;
        Ok((Self::from_alpha_tilde(at.alpha_tilde, t)?, at.lambda))
    }

    /// The identity diffeomorphism.
    pub fn identity(n: usize, t: f64) -> Result<Self> {
        check_grid_size(n)?;
        Self::assemble(t, vec![0.0; n], vec![0.0; n])
    }

    pub fn grid_size(&self) -> usize {
        self.alpha.len()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_tilde(&self) -> &[f64] {
        &self.alpha_tilde
    }

    pub fn jac_min(&self) -> f64 {
        self.jac_min
    }

    pub fn is_identity(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }

    pub fn alpha_at(&self, x: f64) -> f64 {
        interpolate_real(&self.alpha_c, x)
    }

    pub fn alpha_x_at(&self, x: f64) -> f64 {
        interpolate_real(&self.alpha_x_c, x)
    }

    pub fn alpha_xx_at(&self, x: f64) -> f64 {
        interpolate_real(&self.alpha_xx_c, x)
    }

    pub fn alpha_tilde_at(&self, y: f64) -> f64 {
        interpolate_real(&self.alpha_tilde_c, y)
    }

    pub fn alpha_tilde_y_at(&self, y: f64) -> f64 {
        interpolate_real(&self.alpha_tilde_y_c, y)
    }

    /// `alpha_x` on the grid.
    pub fn alpha_x(&self) -> Vec<f64> {
        derivative_real(&self.alpha)
    }

    /// `max_y |alpha_tilde(y) + alpha(y + alpha_tilde(y))|` over grid `y`.
    pub fn composition_residual(&self) -> f64 {
        nodes(self.grid_size())
            .into_iter()
            .zip(&self.alpha_tilde)
            .map(|(y, &at)| (at + self.alpha_at(y + at)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of `(1 + alpha_x(x))(1 + alpha_tilde_y(x + alpha(x))) = 1`
    /// and of the mirrored identity, over grid points.
    pub fn reciprocal_residual(&self) -> f64 {
        let ax = derivative_real(&self.alpha);
        let aty = derivative_real(&self.alpha_tilde);
        let xs = nodes(self.grid_size());
        let mut r = 0.0f64;
        for j in 0..xs.len() {
            let x = xs[j];
            let a = (1.0 + ax[j]) * (1.0 + self.alpha_tilde_y_at(x + self.alpha[j])) - 1.0;
            let b = (1.0 + aty[j]) * (1.0 + self.alpha_x_at(x + self.alpha_tilde[j])) - 1.0;
            r = r.max(a.abs()).max(b.abs());
        }
        r
    }

    /// `x, alpha, alpha_tilde, identity_residual` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,alpha,alpha_tilde,identity_residual\n");
        for (j, x) in nodes(self.grid_size()).into_iter().enumerate() {
            let at = self.alpha_tilde[j];
            let res = at + self.alpha_at(x + at);
            let _ = writeln!(
                s,
                "{x:.17e},{:.17e},{at:.17e},{res:.17e}",
                self.alpha[j]
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_of_constant_potential() {
        let v = Potential::constant(3.0);
        assert!((compute_lambda(&v, 0.0, 2.0, 32).unwrap() - 3.0).abs() < 1e-14);
        let at = compute_alpha_tilde(&v, 0.0, 2.0, 32).unwrap();
        assert!(at.alpha_tilde.iter().all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn lambda_rejects_nonpositive_potential() {
        let v = Potential::new("cos", true, |_, x| x.cos());
        assert!(matches!(
            compute_lambda(&v, 0.0, 2.0, 32),
            Err(Error::Hypothesis { check: Hypothesis::H2, .. })
        ));
    }

    #[test]
    fn lambda_of_power_potential() {
        // V = (a + b cos y)^{-M} has lambda = a^{-M}
        let (a, b, m) = (1.5, 0.4, 3.0);
        let v = Potential::new("p", true, move |_, y| (a + b * y.cos()).powf(-m));
        let l = compute_lambda(&v, 0.0, m, 64).unwrap();
        assert!((l / a.powf(-m) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn small_displacement_inverse() {
        let eps = 0.01;
        let at: Vec<f64> = nodes(64).into_iter().map(|y| eps * y.sin()).collect();
        let pair = DiffeoPair::from_alpha_tilde(at, 0.0).unwrap();
        for (x, a) in nodes(64).into_iter().zip(pair.alpha()) {
            assert!((a + eps * x.sin()).abs() < 2.0 * eps * eps);
        }
        assert!(pair.composition_residual() < 1e-13);
        assert!(pair.reciprocal_residual() < 1e-12);
    }

    #[test]
    fn zero_displacement_is_identity() {
        let pair = DiffeoPair::from_alpha_tilde(vec![0.0; 16], 0.0).unwrap();
        assert!(pair.is_identity());
        assert_eq!(pair.jac_min(), 1.0);
    }
}

//! Uniform grid on the circle, discrete Fourier transform in centered
//! ordering, Sobolev norms, Fourier multipliers and the smooth cutoffs.
//!
//! Modes live in `{-N/2, ..., N/2-1}` and are stored at index `xi + N/2`.
//! The `-N/2` mode has no conjugate partner; every product-like operation
//! zeroes it.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Checks the grid-size contract: even and at least 8.
pub fn check_grid_size(n: usize) -> Result<()> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::Dimension(format!(
            "grid size must be even and >= 8, got {n}"
        )));
    }
    Ok(())
}

/// Centered storage index of mode `xi` on an `n`-point grid.
#[inline]
pub fn mode_index(n: usize, xi: i64) -> usize {
    (xi + (n / 2) as i64) as usize
}

/// Mode stored at centered index `idx`.
#[inline]
pub fn index_mode(n: usize, idx: usize) -> i64 {
    idx as i64 - (n / 2) as i64
}

/// Whether `xi` lies in the truncated range `[-N/2, N/2)`.
#[inline]
pub fn in_range(n: usize, xi: i64) -> bool {
    let h = (n / 2) as i64;
    xi >= -h && xi < h
}

/// Grid nodes `x_j = 2 pi j / N`.
pub fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

/// Centered Fourier coefficients `(1/N) sum_j u_j e^{-i xi x_j}`.
pub fn forward_coefficients(samples: &[C64]) -> Vec<C64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    plan(n, false).process(&mut buf);
    let scale = 1.0 / n as f64;
    let h = n / 2;
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (k, v) in buf.into_iter().enumerate() {
        // FFT bin k carries frequency k (k < N/2) or k - N.
        let idx = if k < h { k + h } else { k - h };
        out[idx] = v * scale;
    }
    out
}

/// Grid samples `sum_xi c_xi e^{i xi x_j}` from centered coefficients.
pub fn inverse_coefficients(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len();
    let h = n / 2;
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for (idx, &c) in coeffs.iter().enumerate() {
        let k = if idx >= h { idx - h } else { idx + h };
        buf[k] = c;
    }
    plan(n, true).process(&mut buf);
    buf
}

/// Evaluates the trigonometric interpolant at an arbitrary point.
/// The unpaired `-N/2` mode is dropped.
pub fn interpolate(coeffs: &[C64], x: f64) -> C64 {
    let n = coeffs.len();
    let h = (n / 2) as i64;
    let step = C64::from_polar(1.0, x);
    let mut acc = C64::new(0.0, 0.0);
    let mut pos = C64::new(1.0, 0.0);
    acc += coeffs[mode_index(n, 0)];
    let mut neg;
    for k in 1..h {
        pos *= step;
        neg = pos.conj();
        acc += coeffs[mode_index(n, k)] * pos + coeffs[mode_index(n, -k)] * neg;
    }
    acc
}

/// Real-valued interpolation helper for real periodic data.
pub fn interpolate_real(coeffs: &[C64], x: f64) -> f64 {
    interpolate(coeffs, x).re
}

/// Multiplies centered coefficients by `m(xi)`; the `-N/2` mode is zeroed
/// when `guard` is set.
pub fn apply_multiplier(coeffs: &mut [C64], guard: bool, m: impl Fn(i64) -> C64) {
    let n = coeffs.len();
    for (idx, c) in coeffs.iter_mut().enumerate() {
        let xi = index_mode(n, idx);
        *c *= m(xi);
    }
    if guard {
        coeffs[0] = C64::new(0.0, 0.0);
    }
}

/// Spectral derivative of real or complex grid samples.
pub fn derivative_samples(samples: &[C64]) -> Vec<C64> {
    let mut c = forward_coefficients(samples);
    apply_multiplier(&mut c, true, |k| C64::new(0.0, k as f64));
    inverse_coefficients(&c)
}

/// Spectral derivative of real data.
pub fn derivative_real(samples: &[f64]) -> Vec<f64> {
    let c: Vec<C64> = samples.iter().map(|&v| C64::new(v, 0.0)).collect();
    derivative_samples(&c).into_iter().map(|v| v.re).collect()
}

/// Zero-mean antiderivative of real data.
pub fn antiderivative_real(samples: &[f64]) -> Vec<f64> {
    let c: Vec<C64> = samples.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut f = forward_coefficients(&c);
    apply_multiplier(&mut f, true, inverse_derivative_multiplier);
    inverse_coefficients(&f).into_iter().map(|v| v.re).collect()
}

fn inverse_derivative_multiplier(k: i64) -> C64 {
    if k == 0 {
        C64::new(0.0, 0.0)
    } else {
        C64::new(0.0, -1.0 / k as f64)
    }
}

/// Japanese bracket `<xi> = (1 + xi^2)^{1/2}`.
#[inline]
pub fn japanese(xi: f64) -> f64 {
    (1.0 + xi * xi).sqrt()
}

/// Smooth step: 0 for `r <= 0`, 1 for `r >= 1`, C-infinity in between.
pub fn smooth_step(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r >= 1.0 {
        return 1.0;
    }
    let z = 1.0 / r - 1.0 / (1.0 - r);
    if z > 700.0 {
        0.0
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(r: f64) -> f64 {
    if r <= 0.0 || r >= 1.0 {
        return 0.0;
    }
    let z = 1.0 / r - 1.0 / (1.0 - r);
    if z.abs() > 700.0 {
        return 0.0;
    }
    let e = z.exp();
    let dz = -1.0 / (r * r) - 1.0 / ((1.0 - r) * (1.0 - r));
    -e / ((1.0 + e) * (1.0 + e)) * dz
}

/// Cutoff that vanishes for `|xi| <= 1/2` and equals 1 for `|xi| >= 1`.
pub fn chi(xi: f64) -> f64 {
    smooth_step(2.0 * xi.abs() - 1.0)
}

/// Derivative of [`chi`].
pub fn chi_derivative(xi: f64) -> f64 {
    2.0 * smooth_step_derivative(2.0 * xi.abs() - 1.0) * xi.signum()
}

/// Cutoff that vanishes for `|xi| <= 1` and equals 1 for `|xi| >= 2`.
pub fn chi0(xi: f64) -> f64 {
    smooth_step(xi.abs() - 1.0)
}

/// Centered Fourier coefficients of a grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<C64>,
}

impl Spectrum {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        check_grid_size(coeffs.len())?;
        Ok(Self { coeffs })
    }

    pub fn grid_size(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient of mode `xi`; zero outside the truncated range.
    pub fn get(&self, xi: i64) -> C64 {
        let n = self.coeffs.len();
        if in_range(n, xi) {
            self.coeffs[mode_index(n, xi)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// `xi, Re, Im` rows.
    pub fn to_csv(&self) -> String {
        let n = self.coeffs.len();
        let mut s = String::from("xi,re,im\n");
        for (idx, c) in self.coeffs.iter().enumerate() {
            let _ = writeln!(s, "{},{:.17e},{:.17e}", index_mode(n, idx), c.re, c.im);
        }
        s
    }
}

/// Complex samples on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    samples: Vec<C64>,
}

impl GridFunction {
    pub fn new(samples: Vec<C64>) -> Result<Self> {
        check_grid_size(samples.len())?;
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                t: f64::NAN,
                x: 2.0 * PI * j as f64 / samples.len() as f64,
                xi: f64::NAN,
            });
        }
        Ok(Self { samples })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        check_grid_size(n)?;
        Self::new(nodes(n).into_iter().map(f).collect())
    }

    pub fn from_spectrum(spec: &Spectrum) -> Self {
        Self {
            samples: inverse_coefficients(spec.coefficients()),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            coeffs: forward_coefficients(&self.samples),
        }
    }

    /// `j, x_j, Re, Im` rows.
    pub fn to_csv(&self) -> String {
        let n = self.samples.len();
        let mut s = String::from("j,x,re,im\n");
        for (j, (x, v)) in nodes(n).into_iter().zip(&self.samples).enumerate() {
            let _ = writeln!(s, "{j},{x:.17e},{:.17e},{:.17e}", v.re, v.im);
        }
        s
    }
}

/// Fourier coefficients of a grid function.
pub fn fourier_coefficients(u: &GridFunction) -> Spectrum {
    u.spectrum()
}

/// `(sum_xi <xi>^{2s} |u_hat(xi)|^2)^{1/2}` over the truncated range.
pub fn sobolev_norm(u: &GridFunction, s: f64) -> f64 {
    sobolev_norm_coefficients(&forward_coefficients(u.samples()), s)
}

/// Sobolev norm computed from centered coefficients.
pub fn sobolev_norm_coefficients(coeffs: &[C64], s: f64) -> f64 {
    let n = coeffs.len();
    coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| japanese(index_mode(n, idx) as f64).powf(2.0 * s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Fourier multiplier `|xi|^a chi(xi)`.
pub fn frac_laplacian(u: &GridFunction, a: f64) -> GridFunction {
    let mut c = forward_coefficients(u.samples());
    apply_multiplier(&mut c, false, |k| {
        if k == 0 {
            C64::new(0.0, 0.0)
        } else {
            let xi = k as f64;
            C64::new(xi.abs().powf(a) * chi(xi), 0.0)
        }
    });
    GridFunction {
        samples: inverse_coefficients(&c),
    }
}

/// Spectral derivative with the `-N/2` mode zeroed.
pub fn derivative(u: &GridFunction) -> GridFunction {
    GridFunction {
        samples: derivative_samples(&u.samples),
    }
}

/// Zero-mean antiderivative: mode 0 maps to 0, mode k to `u_hat(k)/(i k)`.
pub fn inv_derivative(u: &GridFunction) -> GridFunction {
    let mut c = forward_coefficients(u.samples());
    apply_multiplier(&mut c, true, inverse_derivative_multiplier);
    GridFunction {
        samples: inverse_coefficients(&c),
    }
}

fn check_same_grid(u: &GridFunction, v: &GridFunction) -> Result<()> {
    if u.grid_size() != v.grid_size() {
        return Err(Error::Dimension(format!(
            "grid sizes differ: {} vs {}",
            u.grid_size(),
            v.grid_size()
        )));
    }
    Ok(())
}

/// Trapezoidal `int_T u conj(v) dx`.
pub fn l2_inner(u: &GridFunction, v: &GridFunction) -> Result<C64> {
    check_same_grid(u, v)?;
    let n = u.grid_size();
    let sum: C64 = u
        .samples
        .iter()
        .zip(&v.samples)
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok(sum * (2.0 * PI / n as f64))
}

/// `Omega[u1, u2] = i int (u1 conj(u2) - conj(u1) u2) dx`.
pub fn symplectic_form(u1: &GridFunction, u2: &GridFunction) -> Result<f64> {
    let ip = l2_inner(u1, u2)?;
    Ok(-2.0 * ip.im)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn rejects_bad_grid_sizes() {
        assert!(GridFunction::new(vec![c(0.0); 6]).is_err());
        assert!(GridFunction::new(vec![c(0.0); 9]).is_err());
        assert!(GridFunction::new(vec![c(0.0); 8]).is_ok());
    }

    #[test]
    fn cosine_spectrum() {
        let u = GridFunction::from_fn(16, |x| c(x.cos())).unwrap();
        let s = u.spectrum();
        assert!((s.get(1) - c(0.5)).norm() < 1e-15);
        assert!((s.get(-1) - c(0.5)).norm() < 1e-15);
        for k in -8..8i64 {
            if k.abs() != 1 {
                assert!(s.get(k).norm() < 1e-15);
            }
        }
        // ||cos||_{H^1}^2 = 2 * 2 * 0.25
        assert!((sobolev_norm(&u, 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inner_products_and_symplectic_form() {
        let one = GridFunction::from_fn(32, |_| c(1.0)).unwrap();
        let i = GridFunction::from_fn(32, |_| C64::new(0.0, 1.0)).unwrap();
        assert!((l2_inner(&one, &one).unwrap() - c(2.0 * PI)).norm() < 1e-13);
        assert!((symplectic_form(&one, &i).unwrap() - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn fractional_laplacian_of_sine() {
        let u = GridFunction::from_fn(32, |x| c((3.0 * x).sin())).unwrap();
        let v = frac_laplacian(&u, 2.0);
        for (x, w) in nodes(32).into_iter().zip(v.samples()) {
            assert!((w - c(9.0 * (3.0 * x).sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_of_cosine() {
        let u = GridFunction::from_fn(32, |x| c((2.0 * x).cos())).unwrap();
        let v = inv_derivative(&u);
        for (x, w) in nodes(32).into_iter().zip(v.samples()) {
            assert!((w - c((2.0 * x).sin() / 2.0)).norm() < 1e-14);
        }
        let back = derivative(&v);
        for (a, b) in back.samples().iter().zip(u.samples()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn cutoffs_have_required_plateaus() {
        assert_eq!(chi(0.0), 0.0);
        assert_eq!(chi(0.5), 0.0);
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(-3.0), 1.0);
        assert_eq!(chi0(1.0), 0.0);
        assert_eq!(chi0(2.0), 1.0);
        assert!(chi0(1.5) > 0.0 && chi0(1.5) < 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for &r in &[0.2, 0.5, 0.8] {
            let fd = (smooth_step(r + h) - smooth_step(r - h)) / (2.0 * h);
            assert!((fd - smooth_step_derivative(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn interpolation_matches_samples_and_off_grid_values() {
        let f = |x: f64| c(1.0 + 0.3 * x.sin() - 0.2 * (3.0 * x).cos());
        let u = GridFunction::from_fn(16, f).unwrap();
        let co = forward_coefficients(u.samples());
        for x in [0.1, 1.7, 4.4] {
            assert!((interpolate(&co, x) - f(x)).norm() < 1e-14);
        }
    }
}

//! Homological equation removing the x-dependence of a perturbation
//! against the dispersion `lambda |xi|^M`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Hypothesis, Result};
use crate::pdo_calculus::{quantize, OperatorMatrix, Symbol};
use crate::torus_fourier::{
    chi, chi0, derivative_samples, in_range, index_mode, inverse_coefficients, mode_index, nodes,
};

/// `sigma` and the self-adjoint generator `g = sigma + sigma*`, as matrices.
#[derive(Debug, Clone)]
pub struct HomologicalSolution {
    pub sigma: OperatorMatrix,
    pub g: OperatorMatrix,
}

/// Denominator `2 lambda M |xi|^{M-2} xi`, used only where `chi0(xi) != 0`.
fn denominator(lambda: f64, m: f64, xi: f64) -> f64 {
    2.0 * lambda * m * xi.abs().powf(m - 2.0) * xi
}

/// Solves for `sigma = chi0(xi) d_x^{-1}[w - <w>_x] / (2 lambda M |xi|^{M-2} xi)`
/// column by column: entry `(xi + k, xi)` is
/// `chi0(xi) W[xi + k, xi] / (i k 2 lambda M |xi|^{M-2} xi)` for `k != 0`.
pub fn homological_solve(w: &OperatorMatrix, lambda: f64, m: f64) -> Result<HomologicalSolution> {
    if !(lambda > 0.0) {
        return Err(Error::hypothesis(
            Hypothesis::H2,
            format!("lambda = {lambda} must be positive"),
        ));
    }
    let n = w.grid_size();
    let mut sigma = OperatorMatrix::zeros(n, w.time());
    for j in 0..n {
        let xi = index_mode(n, j);
        let c0 = chi0(xi as f64);
        if c0 == 0.0 {
            continue;
        }
        let den = denominator(lambda, m, xi as f64);
        for i in 0..n {
            let k = index_mode(n, i) - xi;
            if k == 0 {
                continue;
            }
            let v = w.mat()[(i, j)];
            if v != C64::new(0.0, 0.0) {
                sigma.mat_mut()[(i, j)] = v * c0 / (C64::new(0.0, k as f64) * den);
            }
        }
    }
    let g = sigma.add(&sigma.adjoint())?;
    Ok(HomologicalSolution { sigma, g })
}

/// Symbol-level solve: quantizes `w` at time `t`, solves, and returns the
/// generator matrix.
pub fn homological_solve_symbol(
    w: &Symbol,
    t: f64,
    lambda: f64,
    m: f64,
    n: usize,
) -> Result<HomologicalSolution> {
    homological_solve(&quantize(w, t, n)?, lambda, m)
}

/// Residual of `-2 lambda M |xi|^{M-2} xi chi(xi) d_x sigma + chi0(xi) (w - <w>_x)`
/// on grid points for integer `2 <= |xi| <= N/4`. The perturbation is
/// evaluated pointwise from its symbol; `d_x sigma` is taken spectrally from
/// the physical-space samples of each column of `sigma`. Columns near the
/// grid edge lose the modes `xi + k` that leave the truncated range, so the
/// check assumes the x-bandwidth of `w` stays below `N/4`.
pub fn homological_residual(w: &Symbol, sigma: &OperatorMatrix, lambda: f64, m: f64) -> f64 {
    let n = sigma.grid_size();
    let t = sigma.time();
    let xs = nodes(n);
    let mut worst = 0.0f64;
    for j in 0..n {
        let xi = index_mode(n, j);
        if xi.abs() < 2 || xi.abs() > (n / 4) as i64 {
            continue;
        }
        let coeffs: Vec<C64> = (0..n)
            .map(|idx| {
                let eta = xi + index_mode(n, idx);
                if in_range(n, eta) {
                    sigma.mat()[(mode_index(n, eta), j)]
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let dsigma = derivative_samples(&inverse_coefficients(&coeffs));
        let wv: Vec<C64> = xs.iter().map(|&x| w.eval(t, x, xi as f64)).collect();
        let avg = wv.iter().sum::<C64>() / n as f64;
        let x = xi as f64;
        let a = denominator(lambda, m, x) * chi(x);
        for (ds, wj) in dsigma.iter().zip(&wv) {
            let r = -a * ds + chi0(x) * (wj - avg);
            worst = worst.max(r.norm());
        }
    }
    worst
}

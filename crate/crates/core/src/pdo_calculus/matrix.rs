//! Dense operators in the centered Fourier basis.

use std::fmt::Write as _;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::torus_fourier::{check_grid_size, in_range, index_mode, japanese, mode_index};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Matrix of an operator in the truncated Fourier basis; entry
/// `(eta, xi)` maps mode `xi` to mode `eta`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    entries: Mat<C64>,
    time: f64,
}

impl PartialEq for OperatorMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.entries == other.entries
    }
}

impl OperatorMatrix {
    pub fn from_mat(entries: Mat<C64>, time: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension(format!(
                "operator matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        check_grid_size(entries.nrows())?;
        Ok(Self { entries, time })
    }

    pub fn zeros(n: usize, time: f64) -> Self {
        Self {
            entries: Mat::zeros(n, n),
            time,
        }
    }

    pub fn identity(n: usize, time: f64) -> Self {
        Self {
            entries: Mat::identity(n, n),
            time,
        }
    }

    /// Fourier multiplier `m(xi)`.
    pub fn diagonal(n: usize, time: f64, m: impl Fn(i64) -> C64) -> Self {
        let mut entries = Mat::zeros(n, n);
        for i in 0..n {
            entries[(i, i)] = m(index_mode(n, i));
        }
        Self { entries, time }
    }

    /// Builds from a rule `(eta, xi) -> entry`.
    pub fn from_modes(n: usize, time: f64, f: impl Fn(i64, i64) -> C64) -> Self {
        Self {
            entries: Mat::from_fn(n, n, |i, j| f(index_mode(n, i), index_mode(n, j))),
            time,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn mat(&self) -> &Mat<C64> {
        &self.entries
    }

    pub fn mat_mut(&mut self) -> &mut Mat<C64> {
        &mut self.entries
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.entries
    }

    /// Entry `(eta, xi)`; zero outside the truncated range.
    pub fn get(&self, eta: i64, xi: i64) -> C64 {
        let n = self.grid_size();
        if in_range(n, eta) && in_range(n, xi) {
            self.entries[(mode_index(n, eta), mode_index(n, xi))]
        } else {
            ZERO
        }
    }

    pub fn set(&mut self, eta: i64, xi: i64, v: C64) {
        let n = self.grid_size();
        self.entries[(mode_index(n, eta), mode_index(n, xi))] = v;
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid_size() != other.grid_size() {
            return Err(Error::Dimension(format!(
                "operator sizes differ: {} vs {}",
                self.grid_size(),
                other.grid_size()
            )));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            entries: &self.entries * &other.entries,
            time: self.time,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            entries: &self.entries + &other.entries,
            time: self.time,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            entries: &self.entries - &other.entries,
            time: self.time,
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        let n = self.grid_size();
        Self {
            entries: Mat::from_fn(n, n, |i, j| self.entries[(i, j)] * c),
            time: self.time,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint().to_owned(),
            time: self.time,
        }
    }

    /// `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.grid_size();
        let a = &self.entries;
        Self {
            entries: Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5),
            time: self.time,
        }
    }

    /// `(A - A^dagger) / 2`.
    pub fn skew_part(&self) -> Self {
        let n = self.grid_size();
        let a = &self.entries;
        Self {
            entries: Mat::from_fn(n, n, |i, j| (a[(i, j)] - a[(j, i)].conj()) * 0.5),
            time: self.time,
        }
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.grid_size();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.entries[(i, j)].norm());
            }
        }
        m
    }

    /// `max |A - A^dagger|` entrywise.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.grid_size();
        let a = &self.entries;
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        m
    }

    /// `max |U^dagger U - I|` entrywise.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.grid_size();
        let p = self.entries.adjoint() * &self.entries;
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let d = if i == j { p[(i, j)] - 1.0 } else { p[(i, j)] };
                m = m.max(d.norm());
            }
        }
        m
    }

    /// Largest entry modulus of `self - other` restricted to `|eta|, |xi| <= half_width`.
    pub fn block_max_diff(&self, other: &Self, half_width: i64) -> Result<f64> {
        self.check_same(other)?;
        let mut m = 0.0f64;
        for xi in -half_width..=half_width {
            for eta in -half_width..=half_width {
                m = m.max((self.get(eta, xi) - other.get(eta, xi)).norm());
            }
        }
        Ok(m)
    }

    /// Principal block `|eta|, |xi| <= half_width` as an owned matrix.
    pub fn block(&self, half_width: i64) -> Mat<C64> {
        let size = (2 * half_width + 1) as usize;
        Mat::from_fn(size, size, |i, j| {
            self.get(i as i64 - half_width, j as i64 - half_width)
        })
    }

    /// Euclidean norm of the column of mode `xi`.
    pub fn column_norm(&self, xi: i64) -> f64 {
        let n = self.grid_size();
        let j = mode_index(n, xi);
        (0..n)
            .map(|i| self.entries[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Diagonal entries in centered order.
    pub fn diagonal_entries(&self) -> Vec<C64> {
        (0..self.grid_size()).map(|i| self.entries[(i, i)]).collect()
    }

    /// `A v` for centered coefficients `v`.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let n = self.grid_size();
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "vector of length {} applied to {n}x{n} operator",
                v.len()
            )));
        }
        let mut out = vec![ZERO; n];
        for (j, &vj) in v.iter().enumerate() {
            if vj == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.entries[(i, j)] * vj;
            }
        }
        Ok(out)
    }

    /// Inverse through partial-pivoting LU; non-finite results are reported.
    pub fn inverse(&self) -> Result<Self> {
        let inv = self.entries.partial_piv_lu().inverse();
        let out = Self {
            entries: inv,
            time: self.time,
        };
        if !out.is_finite() {
            return Err(Error::Numerical("operator is singular".into()));
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        let n = self.grid_size();
        (0..n).all(|j| (0..n).all(|i| self.entries[(i, j)].is_finite()))
    }

    /// Conjugation by Sobolev weights `<D>^{s_out} A <D>^{-s_in}`.
    pub fn sobolev_weighted(&self, s_in: f64, s_out: f64) -> Self {
        let n = self.grid_size();
        let w = |k: usize, s: f64| japanese(index_mode(n, k) as f64).powf(s);
        Self {
            entries: Mat::from_fn(n, n, |i, j| {
                self.entries[(i, j)] * (w(i, s_out) / w(j, s_in))
            }),
            time: self.time,
        }
    }

    /// `xi_out, xi_in, Re, Im` rows for the nonzero entries.
    pub fn to_csv(&self) -> String {
        let n = self.grid_size();
        let mut s = String::from("xi_out,xi_in,re,im\n");
        for j in 0..n {
            for i in 0..n {
                let v = self.entries[(i, j)];
                if v != ZERO {
                    let _ = writeln!(
                        s,
                        "{},{},{:.17e},{:.17e}",
                        index_mode(n, i),
                        index_mode(n, j),
                        v.re,
                        v.im
                    );
                }
            }
        }
        s
    }
}

/// Eigendecomposition `H = U diag(lambda) U^dagger` of a Hermitian matrix.
pub struct HermitianEigen {
    vectors: Mat<C64>,
    values: Vec<f64>,
}

impl HermitianEigen {
    /// Decomposes `h`, which must be Hermitian up to `rel_tol * max|h|`.
    pub fn new(h: &OperatorMatrix, rel_tol: f64) -> Result<Self> {
        let scale = h.max_abs();
        let res = h.hermiticity_residual();
        if res > rel_tol * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Contract(format!(
                "generator is not Hermitian: residual {res:.3e} at scale {scale:.3e}"
            )));
        }
        let sym = h.hermitian_part();
        let evd = sym
            .mat()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
        let values: Vec<f64> = evd.S().column_vector().iter().map(|v| v.re).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite eigenvalue".into()));
        }
        Ok(Self {
            vectors: evd.U().to_owned(),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `U diag(f(lambda)) U^dagger`.
    pub fn function(&self, f: impl Fn(f64) -> C64) -> Mat<C64> {
        let n = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * fv[j]);
        &scaled * self.vectors.adjoint()
    }

    /// `U diag(f(lambda)) U^dagger v` without forming the matrix.
    pub fn apply_function(&self, v: &[C64], f: impl Fn(f64) -> C64) -> Vec<C64> {
        let n = self.values.len();
        let mut w = vec![ZERO; n];
        for (j, wj) in w.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (i, vi) in v.iter().enumerate() {
                acc += self.vectors[(i, j)].conj() * vi;
            }
            *wj = acc * f(self.values[j]);
        }
        let mut out = vec![ZERO; n];
        for (j, &wj) in w.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.vectors[(i, j)] * wj;
            }
        }
        out
    }
}

/// `exp(i tau H)` for Hermitian `H`; the zero matrix maps exactly to the identity.
pub fn exp_i_hermitian(h: &OperatorMatrix, tau: f64) -> Result<OperatorMatrix> {
    let n = h.grid_size();
    if h.max_abs() == 0.0 || tau == 0.0 {
        return Ok(OperatorMatrix::identity(n, h.time()));
    }
    let eig = HermitianEigen::new(h, 1e-10)?;
    let m = eig.function(|l| C64::from_polar(1.0, tau * l));
    OperatorMatrix::from_mat(m, h.time())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_exponential_is_phase() {
        let d = OperatorMatrix::diagonal(8, 0.0, |k| C64::new(k as f64, 0.0));
        let e = exp_i_hermitian(&d, 0.5).unwrap();
        for k in -4..4i64 {
            let want = C64::from_polar(1.0, 0.5 * k as f64);
            assert!((e.get(k, k) - want).norm() < 1e-14);
        }
        assert!(e.unitarity_residual() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian_generator() {
        let mut a = OperatorMatrix::zeros(8, 0.0);
        a.set(1, 0, C64::new(1.0, 0.0));
        assert!(matches!(exp_i_hermitian(&a, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn two_by_two_rotation() {
        // H = [[0, 1], [1, 0]] on modes (0, 1): exp(iH) = cos 1 I + i sin 1 H
        let mut h = OperatorMatrix::zeros(8, 0.0);
        h.set(0, 1, C64::new(1.0, 0.0));
        h.set(1, 0, C64::new(1.0, 0.0));
        let e = exp_i_hermitian(&h, 1.0).unwrap();
        assert!((e.get(0, 0) - C64::new(1f64.cos(), 0.0)).norm() < 1e-14);
        assert!((e.get(1, 0) - C64::new(0.0, 1f64.sin())).norm() < 1e-14);
        assert!((e.get(3, 3) - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn inverse_of_diagonal() {
        let d = OperatorMatrix::diagonal(8, 0.0, |k| C64::new(2.0 + k as f64 * 0.1, 0.0));
        let inv = d.inverse().unwrap();
        let p = d.matmul(&inv).unwrap();
        assert!(p.sub(&OperatorMatrix::identity(8, 0.0)).unwrap().max_abs() < 1e-15);
    }
}

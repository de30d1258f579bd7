//! Problem data `V(t,x)|D|^M + W(t)` and the hypothesis checks.

use num_complex::Complex64 as C64;

use crate::diffeo_transport::Potential;
use crate::error::{Error, Hypothesis, Result};
use crate::pdo_calculus::{estimate_order_window, quantize, OperatorMatrix, Symbol};
use crate::torus_fourier::{check_grid_size, chi, forward_coefficients, in_range, mode_index};

/// Order gained per descent step: `M - max{M - 1, 1, M - frak_e}`.
pub fn ebar(m: f64, frak_e: f64) -> Result<f64> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(Error::hypothesis(
            Hypothesis::H3,
            format!("dispersion exponent M = {m} must exceed 1"),
        ));
    }
    if !(frak_e > 0.0) {
        return Err(Error::hypothesis(
            Hypothesis::H3,
            format!("order gap frak_e = {frak_e} must be positive"),
        ));
    }
    Ok(m - (m - 1.0).max(1.0).max(m - frak_e))
}

/// Number of steps `N_K = [(M + K)/ebar] + 1`.
pub fn n_steps(m: f64, k: usize, ebar: f64) -> usize {
    ((m + k as f64) / ebar).floor() as usize + 1
}

/// Smoothing target for Sobolev index `s`: `K = [s] + 1`.
pub fn k_from_s(s: f64) -> usize {
    s.floor().max(0.0) as usize + 1
}

/// Slack allowed on fitted orders.
pub const ORDER_SLACK: f64 = 0.25;

/// How the operator depends on time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeDependence {
    Autonomous,
    /// `V(t) = S(c t) V(0) S(c t)^*` with `S(a) = diag(e^{-i xi a})`, i.e. the
    /// data travel rigidly at speed `c`.
    Comoving(f64),
    General,
}

/// Conjugates `a` by the translation `S(shift) = diag(e^{-i xi shift})`.
pub fn translate_operator(a: &OperatorMatrix, shift: f64) -> OperatorMatrix {
    let n = a.grid_size();
    let mut out = a.clone();
    for j in 0..n {
        for i in 0..n {
            let k = (i as i64 - j as i64) as f64;
            out.mat_mut()[(i, j)] *= C64::from_polar(1.0, -k * shift);
        }
    }
    out
}

/// Outcome of one hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The operator `V(t,x)|D|^M + Op(w)` and its discretization data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub m: f64,
    pub frak_e: f64,
    pub potential: Potential,
    pub w: Symbol,
    /// Whether `w` is independent of `t`.
    pub w_autonomous: bool,
    pub k: usize,
    pub n: usize,
    pub comoving_speed: Option<f64>,
}

impl ProblemSpec {
    /// Validates the scalar data (`M > 1`, `frak_e > 0`, order gap, grid size).
    pub fn new(
        m: f64,
        frak_e: f64,
        potential: Potential,
        w: Symbol,
        w_autonomous: bool,
        k: usize,
        n: usize,
    ) -> Result<Self> {
        check_grid_size(n)?;
        ebar(m, frak_e)?;
        if w.order() > m - frak_e + 1e-12 {
            return Err(Error::hypothesis(
                Hypothesis::H3,
                format!(
                    "perturbation order {} exceeds M - frak_e = {}",
                    w.order(),
                    m - frak_e
                ),
            ));
        }
        Ok(Self {
            m,
            frak_e,
            potential,
            w,
            w_autonomous,
            k,
            n,
            comoving_speed: None,
        })
    }

    /// Declares the data to travel at speed `c`; checked on the grid at a few
    /// times against the translated operator at `t = 0`.
    pub fn with_comoving_speed(mut self, c: f64) -> Result<Self> {
        let base = self.operator(0.0)?;
        let scale = base.max_abs().max(1.0);
        for t in [0.37, 1.9, 4.4] {
            let moved = translate_operator(&base, c * t);
            let d = self.operator(t)?.sub(&moved)?.max_abs();
            if d > 1e-10 * scale {
                return Err(Error::Contract(format!(
                    "operator at t = {t} differs from the translate at speed {c} by {d:.3e}"
                )));
            }
        }
        self.comoving_speed = Some(c);
        Ok(self)
    }

    pub fn time_dependence(&self) -> TimeDependence {
        if self.is_autonomous() {
            TimeDependence::Autonomous
        } else if let Some(c) = self.comoving_speed {
            TimeDependence::Comoving(c)
        } else {
            TimeDependence::General
        }
    }

    pub fn with_grid(&self, n: usize) -> Result<Self> {
        check_grid_size(n)?;
        Ok(Self { n, ..self.clone() })
    }

    pub fn ebar(&self) -> f64 {
        ebar(self.m, self.frak_e).expect("validated at construction")
    }

    pub fn n_steps(&self) -> usize {
        n_steps(self.m, self.k, self.ebar())
    }

    pub fn is_autonomous(&self) -> bool {
        self.potential.is_autonomous() && self.w_autonomous
    }

    fn w_is_zero(&self) -> bool {
        self.w.order() == f64::NEG_INFINITY
    }

    /// Matrix of `V(t,x)|D|^M chi(D)`.
    pub fn leading_operator(&self, t: f64, n: usize) -> Result<OperatorMatrix> {
        let samples: Vec<C64> = self
            .potential
            .samples(t, n)
            .into_iter()
            .map(|v| C64::new(v, 0.0))
            .collect();
        if let Some(v) = samples.iter().find(|v| !v.re.is_finite()) {
            return Err(Error::Evaluation {
                t,
                x: f64::NAN,
                xi: v.re,
            });
        }
        let mut vh = forward_coefficients(&samples);
        vh[0] = C64::new(0.0, 0.0);
        let h = (n / 2) as i64;
        let m = self.m;
        Ok(OperatorMatrix::from_modes(n, t, |eta, xi| {
            let k = eta - xi;
            if k.abs() < h && in_range(n, k) {
                let x = xi as f64;
                vh[mode_index(n, k)] * (x.abs().powf(m) * chi(x))
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Self-adjoint operator at time `t` on the problem grid: the Hermitian part
    /// of `Op(V|xi|^M chi + w)`.
    pub fn operator(&self, t: f64) -> Result<OperatorMatrix> {
        self.operator_on(t, self.n)
    }

    pub fn operator_on(&self, t: f64, n: usize) -> Result<OperatorMatrix> {
        let mut a = self.leading_operator(t, n)?;
        if !self.w_is_zero() {
            a = a.add(&quantize(&self.w, t, n)?)?;
        }
        Ok(a.hermitian_part())
    }

    /// Runs the hypothesis checks at the given times: positivity of `V` on a
    /// grid four times finer, the order gap, and self-adjointness of the
    /// principal symbol of `w` (the skew part of `Op(w)` must be one order
    /// lower than `w`). Returns the reports, or the first violation.
    pub fn validate(&self, times: &[f64]) -> Result<Vec<CheckReport>> {
        let mut reports = Vec::new();
        let fine = 4 * self.n;
        let mut inf = f64::INFINITY;
        for &t in times {
            inf = inf.min(self.potential.check_positive(t, fine)?);
        }
        reports.push(CheckReport {
            name: "H2".into(),
            passed: true,
            detail: format!("inf V = {inf:.6e} on a {fine}-point grid over {} times", times.len()),
        });
        reports.push(CheckReport {
            name: "H3".into(),
            passed: true,
            detail: format!(
                "order(w) = {} <= M - frak_e = {}",
                self.w.order(),
                self.m - self.frak_e
            ),
        });
        let n_check = self.n.max(128);
        let mut worst = f64::NEG_INFINITY;
        if !self.w_is_zero() {
            for &t in times {
                let q = quantize(&self.w, t, n_check)?;
                let skew = q.skew_part();
                let floor = 1e-11 * q.max_abs().max(1.0);
                let fit = estimate_order_window(&skew, 4, (n_check / 8) as i64, floor)?;
                worst = worst.max(fit.slope);
            }
            let bound = self.w.order() - 1.0 + ORDER_SLACK;
            if worst > bound {
                return Err(Error::hypothesis(
                    Hypothesis::H1,
                    format!(
                        "skew part of Op(w) has fitted order {worst:.3} > {bound:.3}: the principal symbol of w is not real"
                    ),
                ));
            }
        }
        reports.push(CheckReport {
            name: "H1".into(),
            passed: true,
            detail: format!("fitted order of skew part of Op(w): {worst:.3}"),
        });
        Ok(reports)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ebar_examples() {
        assert_eq!(ebar(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(ebar(3.0, 0.5).unwrap(), 0.5);
        assert_eq!(ebar(1.5, 2.0).unwrap(), 0.5);
        assert!(ebar(1.0, 1.0).is_err());
        assert!(ebar(2.0, 0.0).is_err());
    }

    #[test]
    fn step_counts() {
        assert_eq!(n_steps(2.0, 3, 1.0), 6);
        assert_eq!(n_steps(2.0, 2, 0.5), 9);
        assert_eq!(k_from_s(2.3), 3);
        for (m, k, e) in [(2.0, 3, 1.0), (2.0, 2, 0.5), (3.0, 4, 0.5), (1.5, 1, 0.5)] {
            assert!(m - n_steps(m, k, e) as f64 * e < -(k as f64));
        }
    }

    #[test]
    fn order_gap_is_enforced() {
        let w = Symbol::new("|xi|^2", 2.0, |_, _, xi| C64::new(xi * xi, 0.0));
        let r = ProblemSpec::new(2.0, 1.0, Potential::constant(1.0), w, true, 2, 64);
        assert!(matches!(
            r,
            Err(Error::Hypothesis { check: Hypothesis::H3, .. })
        ));
    }

    #[test]
    fn imaginary_principal_symbol_is_rejected() {
        let w = Symbol::new("i cos x |xi|", 1.0, |_, x, xi| {
            C64::new(0.0, x.cos() * xi.abs() * chi(xi))
        });
        let spec = ProblemSpec::new(2.0, 1.0, Potential::constant(1.0), w, true, 2, 64).unwrap();
        assert!(matches!(
            spec.validate(&[0.0]),
            Err(Error::Hypothesis { check: Hypothesis::H1, .. })
        ));
    }

    #[test]
    fn real_symbol_passes_and_operator_is_hermitian() {
        let w = Symbol::new("cos x |xi|", 1.0, |_, x, xi| {
            C64::new(0.1 * x.cos() * xi.abs() * chi(xi), 0.0)
        });
        let v = Potential::new("1+cos/4", true, |_, x| 1.0 + 0.25 * x.cos());
        let spec = ProblemSpec::new(2.0, 1.0, v, w, true, 2, 64).unwrap();
        let reports = spec.validate(&[0.0]).unwrap();
        assert!(reports.iter().all(|r| r.passed));
        let a = spec.operator(0.0).unwrap();
        assert_eq!(a.hermiticity_residual(), 0.0);
        // leading part agrees with direct quantization
        let lead = Symbol::new("V|xi|^2", 2.0, |_, x, xi| {
            C64::new((1.0 + 0.25 * x.cos()) * xi * xi * chi(xi), 0.0)
        });
        let q = quantize(&lead, 0.0, 64).unwrap();
        let l = spec.leading_operator(0.0, 64).unwrap();
        assert!(q.sub(&l).unwrap().max_abs() < 1e-10);
    }
}

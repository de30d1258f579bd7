//! Midpoint-exponential integration of `u_t = -i V(t) u` in the Fourier basis.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::normal_form::{translate_operator, ProblemSpec, TimeDependence};
use crate::pdo_calculus::{exp_i_hermitian, HermitianEigen, OperatorMatrix};
use crate::torus_fourier::{
    forward_coefficients, index_mode, inverse_coefficients, sobolev_norm_coefficients,
    GridFunction,
};

/// Relative Hermiticity tolerance on generators.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Maximum number of stored samples per trajectory.
pub const MAX_SAMPLES: usize = 2000;

pub type OperatorFamily = Arc<dyn Fn(f64) -> Result<OperatorMatrix> + Send + Sync>;

/// A time-dependent self-adjoint generator `V(t)`.
#[derive(Clone)]
pub enum Generator {
    Constant(OperatorMatrix),
    /// `V(t) = S(c (t - t_ref)) V(t_ref) S(c (t - t_ref))^*`.
    Comoving {
        base: OperatorMatrix,
        t_ref: f64,
        speed: f64,
    },
    Family(OperatorFamily),
}

impl std::fmt::Debug for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Generator::Constant(_) => write!(f, "Generator::Constant"),
            Generator::Comoving { speed, t_ref, .. } => {
                write!(f, "Generator::Comoving {{ speed: {speed}, t_ref: {t_ref} }}")
            }
            Generator::Family(_) => write!(f, "Generator::Family"),
        }
    }
}

impl Generator {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        Ok(match spec.time_dependence() {
            TimeDependence::Autonomous => Generator::Constant(spec.operator(0.0)?),
            TimeDependence::Comoving(speed) => Generator::Comoving {
                base: spec.operator(0.0)?,
                t_ref: 0.0,
                speed,
            },
            TimeDependence::General => {
                let spec = spec.clone();
                Generator::Family(Arc::new(move |t| spec.operator(t)))
            }
        })
    }

    pub fn family(f: impl Fn(f64) -> Result<OperatorMatrix> + Send + Sync + 'static) -> Self {
        Generator::Family(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> Result<OperatorMatrix> {
        match self {
            Generator::Constant(a) => Ok(a.clone().with_time(t)),
            Generator::Comoving { base, t_ref, speed } => {
                Ok(translate_operator(base, speed * (t - t_ref)).with_time(t))
            }
            Generator::Family(f) => f(t),
        }
    }

    fn grid_size(&self, t: f64) -> Result<usize> {
        Ok(match self {
            Generator::Constant(a) => a.grid_size(),
            Generator::Comoving { base, .. } => base.grid_size(),
            Generator::Family(f) => f(t)?.grid_size(),
        })
    }
}

/// Splits `[t0, t1]` into equal steps no longer than `dt`.
pub(crate) fn step_plan(t0: f64, t1: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Contract(format!("time step dt = {dt} must be positive")));
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Contract(format!("non-finite time interval [{t0}, {t1}]")));
    }
    let span = t1 - t0;
    let steps = ((span.abs() / dt) - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok((0, 0.0));
    }
    Ok((steps, span / steps as f64))
}

/// `diag(e^{-i xi a}) v`.
pub(crate) fn translate_vector(v: &mut [C64], a: f64) {
    let n = v.len();
    for (i, c) in v.iter_mut().enumerate() {
        *c *= C64::from_polar(1.0, -(index_mode(n, i) as f64) * a);
    }
}

fn exp_minus_i(h: &OperatorMatrix, tau: f64) -> Result<OperatorMatrix> {
    check_hermitian(h)?;
    exp_i_hermitian(h, -tau)
}

pub(crate) fn check_hermitian(h: &OperatorMatrix) -> Result<()> {
    let scale = h.max_abs();
    let res = h.hermiticity_residual();
    if res > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Contract(format!(
            "generator at t = {} is not Hermitian: residual {res:.3e} at scale {scale:.3e}",
            h.time()
        )));
    }
    Ok(())
}

/// One-step propagator `exp(-i h V(t + h/2))`, cached when it does not
/// depend on `t` beyond a translation.
pub(crate) struct Stepper<'a> {
    gen: &'a Generator,
    h: f64,
    cached: Option<OperatorMatrix>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(gen: &'a Generator, h: f64) -> Result<Self> {
        let cached = match gen {
            Generator::Constant(a) => Some(exp_minus_i(a, h)?),
            Generator::Comoving { base, .. } => Some(exp_minus_i(base, h)?),
            Generator::Family(_) => None,
        };
        Ok(Self { gen, h, cached })
    }

    /// Advances coefficients `v` from `t` to `t + h`.
    pub(crate) fn apply(&self, t: f64, v: &mut Vec<C64>) -> Result<()> {
        let mid = t + 0.5 * self.h;
        match (self.gen, &self.cached) {
            (Generator::Constant(_), Some(e)) => *v = e.apply(v)?,
            (Generator::Comoving { t_ref, speed, .. }, Some(e)) => {
                let a = speed * (mid - t_ref);
                translate_vector(v, -a);
                *v = e.apply(v)?;
                translate_vector(v, a);
            }
            (Generator::Family(f), _) => {
                let g = f(mid)?;
                check_hermitian(&g)?;
                let eig = HermitianEigen::new(&g, HERMITIAN_TOL)?;
                let h = self.h;
                *v = eig.apply_function(v, |l| C64::from_polar(1.0, -h * l));
            }
            _ => unreachable!("cache matches generator kind"),
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at t = {}", t + self.h)));
        }
        Ok(())
    }

    /// The step matrix at `t`.
    pub(crate) fn matrix(&self, t: f64) -> Result<OperatorMatrix> {
        let mid = t + 0.5 * self.h;
        match (self.gen, &self.cached) {
            (Generator::Constant(_), Some(e)) => Ok(e.clone()),
            (Generator::Comoving { t_ref, speed, .. }, Some(e)) => {
                Ok(translate_operator(e, speed * (mid - t_ref)))
            }
            (Generator::Family(f), _) => exp_minus_i(&f(mid)?, self.h),
            _ => unreachable!("cache matches generator kind"),
        }
    }
}

/// Sampled solution with its norm table.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridFunction {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// `||u(t)||_{H^s}` at every sample.
    pub fn norms(&self, s: f64) -> Vec<f64> {
        self.states
            .iter()
            .map(|u| sobolev_norm_coefficients(&forward_coefficients(u.samples()), s))
            .collect()
    }

    /// `max_t | ||u(t)|| - ||u0|| | / ||u0||` in `L^2`.
    pub fn l2_drift(&self) -> f64 {
        let n = self.norms(0.0);
        let n0 = n[0].max(f64::MIN_POSITIVE);
        n.iter().fold(0.0, |m, v| m.max((v - n[0]).abs() / n0))
    }

    /// `t, l2, hs_<s>...` rows.
    pub fn to_csv(&self, s_list: &[f64]) -> String {
        let mut out = String::from("t,l2");
        for s in s_list {
            let _ = write!(out, ",hs_{s}");
        }
        out.push('\n');
        let l2 = self.norms(0.0);
        let cols: Vec<Vec<f64>> = s_list.iter().map(|&s| self.norms(s)).collect();
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t:.17e},{:.17e}", l2[k]);
            for c in &cols {
                let _ = write!(out, ",{:.17e}", c[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// Sampling stride keeping at most [`MAX_SAMPLES`] intervals.
pub(crate) fn sample_stride(steps: usize) -> usize {
    steps.div_ceil(MAX_SAMPLES).max(1)
}

/// Integrates `u_t = -i V(t) u` from `t0` to `t1` (either direction) with
/// midpoint-exponential steps of length at most `dt`.
pub fn propagate(gen: &Generator, u0: &GridFunction, t0: f64, t1: f64, dt: f64) -> Result<Trajectory> {
    let (steps, h) = step_plan(t0, t1, dt)?;
    let n = gen.grid_size(t0)?;
    if n != u0.grid_size() {
        return Err(Error::Dimension(format!(
            "state on {} points, generator on {n}",
            u0.grid_size()
        )));
    }
    let mut v = forward_coefficients(u0.samples());
    let mut times = vec![t0];
    let mut states = vec![u0.clone()];
    if steps == 0 {
        return Ok(Trajectory { times, states });
    }
    let stepper = Stepper::new(gen, h)?;
    let stride = sample_stride(steps);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        stepper.apply(t, &mut v)?;
        if (k + 1) % stride == 0 || k + 1 == steps {
            times.push(t0 + (k + 1) as f64 * h);
            states.push(GridFunction::new(inverse_coefficients(&v))?);
        }
    }
    Ok(Trajectory { times, states })
}

/// Accumulated propagator matrices `U(t0, t)` at increasing times `ts`.
pub fn propagator_snapshots(gen: &Generator, t0: f64, ts: &[f64], dt: f64) -> Result<Vec<OperatorMatrix>> {
    let n = gen.grid_size(t0)?;
    let mut u = OperatorMatrix::identity(n, t0);
    let mut out = Vec::with_capacity(ts.len());
    let mut start = t0;
    for &t in ts {
        if (t - start) * (ts.last().copied().unwrap_or(t) - t0) < 0.0 {
            return Err(Error::Contract("snapshot times must be monotone away from t0".into()));
        }
        let (steps, h) = step_plan(start, t, dt)?;
        if steps > 0 {
            let stepper = Stepper::new(gen, h)?;
            for k in 0..steps {
                u = stepper.matrix(start + k as f64 * h)?.matmul(&u)?;
            }
        }
        if !u.is_finite() {
            return Err(Error::Numerical(format!("non-finite propagator at t = {t}")));
        }
        out.push(u.clone().with_time(t));
        start = t;
    }
    Ok(out)
}

/// Accumulated propagator `U(t0, t1)`.
pub fn propagator_matrix(gen: &Generator, t0: f64, t1: f64, dt: f64) -> Result<OperatorMatrix> {
    Ok(propagator_snapshots(gen, t0, &[t1], dt)?.remove(0))
}

/// Step-halving estimate: `l^2` distance between the solutions at `t1`
/// computed with steps `dt` and `dt/2`, relative to `||u0||`. For a
/// second-order method the error of the finer solution is about a third of it.
pub fn step_halving(gen: &Generator, u0: &GridFunction, t0: f64, t1: f64, dt: f64) -> Result<f64> {
    let a = forward_coefficients(propagate(gen, u0, t0, t1, dt)?.final_state().samples());
    let b = forward_coefficients(propagate(gen, u0, t0, t1, 0.5 * dt)?.final_state().samples());
    let d = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let n0 = sobolev_norm_coefficients(&forward_coefficients(u0.samples()), 0.0);
    Ok(d / n0.max(f64::MIN_POSITIVE))
}

/// Largest singular value of `<D>^{s_out} A <D>^{-s_in}`.
pub fn operator_norm(a: &OperatorMatrix, s_in: f64, s_out: f64) -> Result<f64> {
    let w = a.sobolev_weighted(s_in, s_out);
    let sv = w
        .mat()
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

/// [`operator_norm`] restricted to the block `|xi| <= half_width`.
pub fn operator_norm_block(a: &OperatorMatrix, s_in: f64, s_out: f64, half_width: i64) -> Result<f64> {
    let w = a.sobolev_weighted(s_in, s_out).block(half_width);
    let sv = w
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

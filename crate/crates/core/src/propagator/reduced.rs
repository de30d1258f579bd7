//! The reduced equation `v_t = -i (lambda_K(t, D) + W_K(t)) v` and the map
//! back to the original variables `u = T_K v`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::normal_form::{
    translate_operator, EvolutionSign, ReductionResult, TimeDependence,
};
use crate::pdo_calculus::{exp_i_hermitian, HermitianEigen, OperatorMatrix};
use crate::torus_fourier::{forward_coefficients, inverse_coefficients, GridFunction};

use super::integrator::{
    check_hermitian, propagate, sample_stride, step_plan, translate_vector, Generator,
    Trajectory, HERMITIAN_TOL,
};

#[derive(Debug, Clone)]
struct Sample {
    t: f64,
    lambda_k: Vec<f64>,
    w_k: OperatorMatrix,
    tk: OperatorMatrix,
}

/// `lambda_K`, `W_K` and `T_K` as functions of time. Travelling data are
/// translated from one reduction; otherwise `lambda_K` and `W_K` are linear
/// between sample times and `T_K` is available at the sample times only.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    samples: Vec<Sample>,
    mode: TimeDependence,
}

const TIME_EPS: f64 = 1e-12;

impl ReducedModel {
    pub fn from_result(res: &ReductionResult) -> Result<Self> {
        if res.sign != EvolutionSign::Minus {
            return Err(Error::Contract(
                "the reduced equation is integrated as v_t = -i(lambda_K + W_K) v; reduce with the minus orientation".into(),
            ));
        }
        if res.samples.is_empty() {
            return Err(Error::Contract("reduction has no samples".into()));
        }
        let mut samples = Vec::with_capacity(res.samples.len());
        for s in &res.samples {
            samples.push(Sample {
                t: s.t,
                lambda_k: s.lambda_k.clone(),
                w_k: s.w_k.clone(),
                tk: s.tk()?,
            });
        }
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self {
            samples,
            mode: res.time_dependence,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.samples[0].lambda_k.len()
    }

    pub fn time_dependence(&self) -> TimeDependence {
        self.mode
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Bracketing samples and weight of the later one.
    fn bracket(&self, t: f64) -> Result<(usize, usize, f64)> {
        let s = &self.samples;
        if s.len() == 1 {
            return Ok((0, 0, 0.0));
        }
        let (first, last) = (s[0].t, s[s.len() - 1].t);
        if t < first - TIME_EPS || t > last + TIME_EPS {
            return Err(Error::Contract(format!(
                "t = {t} outside the reduced samples [{first}, {last}]"
            )));
        }
        let j = s.partition_point(|x| x.t <= t).clamp(1, s.len() - 1);
        let w = ((t - s[j - 1].t) / (s[j].t - s[j - 1].t)).clamp(0.0, 1.0);
        Ok((j - 1, j, w))
    }

    fn shift(&self, t: f64) -> f64 {
        match self.mode {
            TimeDependence::Comoving(c) => c * (t - self.samples[0].t),
            _ => 0.0,
        }
    }

    fn single(&self) -> bool {
        !matches!(self.mode, TimeDependence::General) || self.samples.len() == 1
    }

    /// `lambda_K(t, xi)` in centered order.
    pub fn lambda_k(&self, t: f64) -> Result<Vec<f64>> {
        if self.single() {
            return Ok(self.samples[0].lambda_k.clone());
        }
        let (a, b, w) = self.bracket(t)?;
        Ok(self.samples[a]
            .lambda_k
            .iter()
            .zip(&self.samples[b].lambda_k)
            .map(|(x, y)| (1.0 - w) * x + w * y)
            .collect())
    }

    pub fn w_k(&self, t: f64) -> Result<OperatorMatrix> {
        if self.single() {
            return Ok(translate_operator(&self.samples[0].w_k, self.shift(t)).with_time(t));
        }
        let (a, b, w) = self.bracket(t)?;
        let wa = self.samples[a].w_k.scale(C64::new(1.0 - w, 0.0));
        Ok(wa.add(&self.samples[b].w_k.scale(C64::new(w, 0.0)))?.with_time(t))
    }

    pub fn tk(&self, t: f64) -> Result<OperatorMatrix> {
        match self.mode {
            TimeDependence::Autonomous => Ok(self.samples[0].tk.clone().with_time(t)),
            TimeDependence::Comoving(_) => {
                Ok(translate_operator(&self.samples[0].tk, self.shift(t)).with_time(t))
            }
            TimeDependence::General => self
                .samples
                .iter()
                .find(|s| (s.t - t).abs() <= TIME_EPS)
                .map(|s| s.tk.clone())
                .ok_or_else(|| {
                    Error::Contract(format!("T_K is only sampled at the reduction times, not {t}"))
                }),
        }
    }

    /// `int_a^b lambda_K` by composite Simpson on four panels.
    fn phase_integral(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        if self.single() {
            return Ok(self.samples[0].lambda_k.iter().map(|l| l * (b - a)).collect());
        }
        let h = (b - a) / 4.0;
        let weights = [1.0, 4.0, 2.0, 4.0, 1.0];
        let mut acc = vec![0.0; self.grid_size()];
        for (k, w) in weights.iter().enumerate() {
            for (o, l) in acc.iter_mut().zip(self.lambda_k(a + k as f64 * h)?) {
                *o += w * l;
            }
        }
        Ok(acc.into_iter().map(|v| v * h / 3.0).collect())
    }
}

fn apply_phase(v: &mut [C64], phase: &[f64]) {
    for (c, p) in v.iter_mut().zip(phase) {
        *c *= C64::from_polar(1.0, -p);
    }
}

/// Integrates the reduced equation by a symmetric splitting: exact
/// multiplier phases over each half step around a midpoint exponential of
/// `W_K`.
pub fn propagate_reduced(
    model: &ReducedModel,
    v0: &GridFunction,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = model.grid_size();
    if v0.grid_size() != n {
        return Err(Error::Dimension(format!(
            "state on {} points, reduction on {n}",
            v0.grid_size()
        )));
    }
    let (steps, h) = step_plan(t0, t1, dt)?;
    let mut times = vec![t0];
    let mut states = vec![v0.clone()];
    if steps == 0 {
        return Ok(Trajectory { times, states });
    }
    let cached = if model.single() {
        let w = &model.samples[0].w_k;
        check_hermitian(w)?;
        Some(exp_i_hermitian(w, -h)?)
    } else {
        None
    };
    let mut v = forward_coefficients(v0.samples());
    let stride = sample_stride(steps);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let mid = t + 0.5 * h;
        apply_phase(&mut v, &model.phase_integral(t, mid)?);
        match &cached {
            Some(e) => {
                let a = model.shift(mid);
                translate_vector(&mut v, -a);
                v = e.apply(&v)?;
                translate_vector(&mut v, a);
            }
            None => {
                let w = model.w_k(mid)?;
                let eig = HermitianEigen::new(&w, HERMITIAN_TOL)?;
                v = eig.apply_function(&v, |l| C64::from_polar(1.0, -h * l));
            }
        }
        apply_phase(&mut v, &model.phase_integral(mid, t + h)?);
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical(format!("non-finite reduced state at t = {}", t + h)));
        }
        if (k + 1) % stride == 0 || k + 1 == steps {
            times.push(t0 + (k + 1) as f64 * h);
            states.push(GridFunction::new(inverse_coefficients(&v))?);
        }
    }
    Ok(Trajectory { times, states })
}

/// Maps a reduced state back: `u = T_K(t) v`.
pub fn to_original(model: &ReducedModel, t: f64, v: &GridFunction) -> Result<GridFunction> {
    let c = model.tk(t)?.apply(&forward_coefficients(v.samples()))?;
    GridFunction::new(inverse_coefficients(&c))
}

/// Maps an original state to reduced variables: `v = T_K(t)^{-1} u`, with
/// the inverse taken as the adjoint of the unitary `T_K`.
pub fn to_reduced(model: &ReducedModel, t: f64, u: &GridFunction) -> Result<GridFunction> {
    let c = model.tk(t)?.adjoint().apply(&forward_coefficients(u.samples()))?;
    GridFunction::new(inverse_coefficients(&c))
}

/// Cross-propagation check: evolves `v0` by the reduced equation and
/// `T_K(t0) v0` by the original one, and returns the largest grid sup-norm
/// distance between `T_K(t) v(t)` and `u(t)` over the stored samples.
pub fn cross_propagation_error(
    model: &ReducedModel,
    gen: &Generator,
    v0: &GridFunction,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<f64> {
    let reduced = propagate_reduced(model, v0, t0, t1, dt)?;
    let u0 = to_original(model, t0, v0)?;
    let original = propagate(gen, &u0, t0, t1, dt)?;
    let mut worst = 0.0f64;
    for ((t, v), u) in reduced.times.iter().zip(&reduced.states).zip(&original.states) {
        if model.tk(*t).is_err() {
            continue;
        }
        let mapped = to_original(model, *t, v)?;
        let d = mapped
            .samples()
            .iter()
            .zip(u.samples())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        worst = worst.max(d);
    }
    Ok(worst)
}

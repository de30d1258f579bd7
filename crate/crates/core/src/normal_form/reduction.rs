//! The reduction pipeline: straightening of the leading coefficient by the
//! transport flow, then `N_K - 1` homological descent steps, each conjugating
//! by `exp(i G_n)`.
//!
//! Conjugation by `Phi` maps the generator of `u_t = s i V u` (`s = +-1`) to
//! `Phi V Phi^{-1} + s i Phi d_t(Phi^{-1})`.
//!
//! For data travelling at a constant speed the flow derivatives are exact
//! commutators with `diag(xi)`. Otherwise they are central differences on a
//! stencil of `2 N_K + 1` times around each requested time. Level `n` of the pipeline is
//! only formed at stencil points that still have both neighbours, so the
//! stencil shrinks by one point per side per level and ends at the centre.
//! Every finite-difference term `Phi d_t(Phi^{-1})` is projected on its
//! skew-Hermitian part (the exact derivative of a unitary family is
//! skew-Hermitian), which keeps each conjugated operator self-adjoint.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::diffeo_transport::{flow_log_derivative, transport_flow, DiffeoPair};
use crate::error::{Error, LedgerEntry, Result};
use crate::pdo_calculus::{estimate_order_window, exp_i_hermitian, OperatorMatrix};
use crate::torus_fourier::{chi, index_mode};

use super::homological::homological_solve;
use super::problem::{ProblemSpec, TimeDependence, ORDER_SLACK};

/// Sign `s` of the evolution `u_t = s i V(t) u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum EvolutionSign {
    Plus,
    #[default]
    Minus,
}

impl EvolutionSign {
    pub fn factor(self) -> f64 {
        match self {
            EvolutionSign::Plus => 1.0,
            EvolutionSign::Minus => -1.0,
        }
    }
}

/// Numerical parameters of the reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionOptions {
    /// Midpoint-exponential substeps for each transport flow.
    pub substeps: usize,
    /// Time step of the central differences.
    pub h_t: f64,
    /// Slack on the order ledger bounds.
    pub slack: f64,
    pub sign: EvolutionSign,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            substeps: 32,
            h_t: 1e-3,
            slack: ORDER_SLACK,
            sign: EvolutionSign::default(),
        }
    }
}

/// State after `n - 1` descent steps, at the requested time.
#[derive(Debug, Clone)]
pub struct ReductionStep {
    pub n: usize,
    /// `mu_n(xi)` in centered order.
    pub mu: Vec<f64>,
    /// `W_n = V_n - lambda |D|^M - mu_n(D)`.
    pub w: OperatorMatrix,
    /// Generator `G_n` solving the homological equation (absent for the last level).
    pub g: Option<OperatorMatrix>,
    /// `Phi_n = exp(i G_n)`.
    pub flow: Option<OperatorMatrix>,
    /// `Phi_n d_t(Phi_n^{-1})` (skew-Hermitian; zero for autonomous problems).
    pub flow_log_derivative: Option<OperatorMatrix>,
    pub fitted_order_w: f64,
    pub bound: f64,
    /// Relative Hermiticity defect of `V_n` before symmetrization.
    pub hermiticity_residual: f64,
    /// Largest imaginary part met when folding `<w_{n-1}>_x` into `mu_n`.
    pub mu_imag_max: f64,
}

impl ReductionStep {
    pub fn mu_linf(&self) -> f64 {
        self.mu.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn ledger_entry(&self) -> LedgerEntry {
        LedgerEntry {
            step: self.n,
            fitted_order: self.fitted_order_w,
            bound: self.bound,
            hermiticity_residual: self.hermiticity_residual,
            mu_linf: self.mu_linf(),
        }
    }
}

/// Reduction at one time.
#[derive(Debug, Clone)]
pub struct ReductionSample {
    pub t: f64,
    pub sign: EvolutionSign,
    pub lambda: f64,
    pub pair: DiffeoPair,
    /// Transport flow `Phi(1; t)`.
    pub flow: OperatorMatrix,
    /// `Phi d_t(Phi^{-1})` for the transport flow.
    pub flow_log_derivative: OperatorMatrix,
    /// The original self-adjoint operator at `t`.
    pub v: OperatorMatrix,
    /// Levels `1..=N_K`.
    pub steps: Vec<ReductionStep>,
    /// `lambda |xi|^M chi(xi) + mu_{N_K}(xi)` in centered order.
    pub lambda_k: Vec<f64>,
    /// Final remainder `W_K`.
    pub w_k: OperatorMatrix,
    /// Max-entry defect of the conjugation identity on the headroom block.
    pub conjugation_residual: f64,
}

impl ReductionSample {
    /// Factors `Phi^{-1}, Phi_1^{-1}, ..., Phi_{N_K-1}^{-1}` of `T_K`.
    pub fn tk_factors(&self) -> Vec<OperatorMatrix> {
        let mut f = vec![self.flow.adjoint()];
        f.extend(self.steps.iter().filter_map(|s| s.flow.as_ref().map(|p| p.adjoint())));
        f
    }

    /// Time derivatives of the factors, `d_t(Phi_n^{-1}) = Phi_n^{-1} (Phi_n d_t(Phi_n^{-1}))`.
    pub fn tk_factor_derivatives(&self) -> Result<Vec<OperatorMatrix>> {
        let mut d = vec![self.flow.adjoint().matmul(&self.flow_log_derivative)?];
        for s in &self.steps {
            if let (Some(p), Some(ld)) = (&s.flow, &s.flow_log_derivative) {
                d.push(p.adjoint().matmul(ld)?);
            }
        }
        Ok(d)
    }

    /// `T_K` as a matrix.
    pub fn tk(&self) -> Result<OperatorMatrix> {
        let f = self.tk_factors();
        let mut t = f[0].clone();
        for x in &f[1..] {
            t = t.matmul(x)?;
        }
        Ok(t)
    }

    /// `d_t T_K` by the product rule over the factors.
    pub fn tk_derivative(&self) -> Result<OperatorMatrix> {
        let f = self.tk_factors();
        let d = self.tk_factor_derivatives()?;
        let n = self.flow.grid_size();
        let mut total = OperatorMatrix::zeros(n, self.t);
        for i in 0..f.len() {
            let mut term = if i == 0 { d[0].clone() } else { f[0].clone() };
            for (j, fj) in f.iter().enumerate().skip(1) {
                term = term.matmul(if j == i { &d[j] } else { fj })?;
            }
            total = total.add(&term)?;
        }
        Ok(total)
    }

    /// `Lambda_K = diag(lambda_k)`.
    pub fn lambda_k_operator(&self) -> OperatorMatrix {
        let n = self.flow.grid_size();
        let lk = self.lambda_k.clone();
        OperatorMatrix::diagonal(n, self.t, move |k| {
            C64::new(lk[(k + (n / 2) as i64) as usize], 0.0)
        })
    }

    pub fn ledger(&self) -> Vec<LedgerEntry> {
        self.steps.iter().map(|s| s.ledger_entry()).collect()
    }

    pub fn mu_imag_max(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.mu_imag_max))
    }
}

/// Reduction over a set of sample times.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub time_dependence: TimeDependence,
    pub sign: EvolutionSign,
    pub m: f64,
    pub ebar: f64,
    pub k: usize,
    pub n_k: usize,
    pub n: usize,
    pub samples: Vec<ReductionSample>,
}

#[derive(Serialize)]
struct SummaryStep {
    step: usize,
    fitted_order_w: f64,
    bound: f64,
    hermiticity_residual: f64,
    mu_linf: f64,
}

#[derive(Serialize)]
struct SummarySample {
    t: f64,
    lambda: f64,
    jac_min: f64,
    conjugation_residual: f64,
    mu_imag_max: f64,
    ledger: Vec<SummaryStep>,
}

#[derive(Serialize)]
struct Summary {
    orientation: &'static str,
    time_dependence: String,
    m: f64,
    ebar: f64,
    k: usize,
    n_k: usize,
    grid_size: usize,
    samples: Vec<SummarySample>,
}

impl ReductionResult {
    pub fn lambda_samples(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.lambda)).collect()
    }

    /// `step, fitted_order_w, hermiticity_residual, mu_linf` rows (with the
    /// sample time when several times were reduced).
    pub fn ledger_csv(&self) -> String {
        let mut s = String::from("t,step,fitted_order_w,hermiticity_residual,mu_linf\n");
        for smp in &self.samples {
            for e in smp.ledger() {
                let _ = writeln!(
                    s,
                    "{:.17e},{},{:.17e},{:.17e},{:.17e}",
                    smp.t, e.step, e.fitted_order, e.hermiticity_residual, e.mu_linf
                );
            }
        }
        s
    }

    /// `t, lambda` rows.
    pub fn lambda_csv(&self) -> String {
        let mut s = String::from("t,lambda\n");
        for (t, l) in self.lambda_samples() {
            let _ = writeln!(s, "{t:.17e},{l:.17e}");
        }
        s
    }

    /// `t, xi, lambda_k` rows.
    pub fn lambda_k_csv(&self) -> String {
        let mut s = String::from("t,xi,lambda_k\n");
        for smp in &self.samples {
            let n = smp.lambda_k.len();
            for (i, v) in smp.lambda_k.iter().enumerate() {
                let _ = writeln!(s, "{:.17e},{},{v:.17e}", smp.t, index_mode(n, i));
            }
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let summary = Summary {
            orientation: match self.sign {
                EvolutionSign::Plus => "plus",
                EvolutionSign::Minus => "minus",
            },
            time_dependence: match self.time_dependence {
                TimeDependence::Autonomous => "autonomous".into(),
                TimeDependence::Comoving(c) => format!("comoving({c})"),
                TimeDependence::General => "general".into(),
            },
            m: self.m,
            ebar: self.ebar,
            k: self.k,
            n_k: self.n_k,
            grid_size: self.n,
            samples: self
                .samples
                .iter()
                .map(|s| SummarySample {
                    t: s.t,
                    lambda: s.lambda,
                    jac_min: s.pair.jac_min(),
                    conjugation_residual: s.conjugation_residual,
                    mu_imag_max: s.mu_imag_max(),
                    ledger: s
                        .ledger()
                        .into_iter()
                        .map(|e| SummaryStep {
                            step: e.step,
                            fitted_order_w: e.fitted_order,
                            bound: e.bound,
                            hermiticity_residual: e.hermiticity_residual,
                            mu_linf: e.mu_linf,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }
}

/// Symmetrizes `A`, returning it with its relative Hermiticity defect.
fn symmetrize(a: OperatorMatrix) -> (OperatorMatrix, f64) {
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let res = a.hermiticity_residual() / scale;
    (a.hermitian_part(), res)
}

/// `Phi X Phi^dagger + s i D`, symmetrized.
fn conjugate_step(
    phi: &OperatorMatrix,
    x: &OperatorMatrix,
    d: &OperatorMatrix,
    sign: EvolutionSign,
) -> Result<(OperatorMatrix, f64)> {
    let c = phi.matmul(x)?.matmul(&phi.adjoint())?;
    Ok(symmetrize(c.add(&d.scale(C64::new(0.0, sign.factor())))?))
}

/// `Phi d_t(Phi^{-1}) = -i c (Phi Xi Phi^dagger - Xi)` for a family
/// `Phi(t) = S(c t) Phi(0) S(c t)^*`, `Xi = diag(xi)`.
fn comoving_log_derivative(phi: &OperatorMatrix, c: f64) -> Result<OperatorMatrix> {
    let n = phi.grid_size();
    let xi = OperatorMatrix::diagonal(n, phi.time(), |k| C64::new(k as f64, 0.0));
    let inner = phi.matmul(&xi)?.matmul(&phi.adjoint())?.sub(&xi)?;
    Ok(inner.scale(C64::new(0.0, -c)).skew_part())
}

fn dispersion(n: usize, t: f64, lambda: f64, m: f64) -> OperatorMatrix {
    OperatorMatrix::diagonal(n, t, |k| {
        let x = k as f64;
        C64::new(lambda * x.abs().powf(m) * chi(x), 0.0)
    })
}

fn mu_operator(n: usize, t: f64, mu: &[f64]) -> OperatorMatrix {
    let mu = mu.to_vec();
    OperatorMatrix::diagonal(n, t, move |k| C64::new(mu[(k + (n / 2) as i64) as usize], 0.0))
}

/// Noise floor for order fits of remainders of `v`.
fn order_floor(v: &OperatorMatrix) -> f64 {
    4.0 * f64::EPSILON * v.max_abs() * (v.grid_size() as f64).sqrt()
}

/// Pipeline state at one level, held on the shrinking time stencil.
#[derive(Debug, Clone)]
pub struct ReductionState {
    m: f64,
    ebar: f64,
    n_k: usize,
    n: usize,
    slack: f64,
    h: f64,
    mode: TimeDependence,
    sign: EvolutionSign,
    times: Vec<f64>,
    lambdas: Vec<f64>,
    /// Current level (1-based).
    level: usize,
    v: Vec<Option<OperatorMatrix>>,
    herm: Vec<f64>,
    mu: Vec<Vec<f64>>,
    mu_imag: f64,
    steps: Vec<ReductionStep>,
    pair: DiffeoPair,
    flow: OperatorMatrix,
    flow_log_derivative: OperatorMatrix,
    original: OperatorMatrix,
}

impl ReductionState {
    fn centre(&self) -> usize {
        self.times.len() / 2
    }

    fn range(&self, level: usize) -> std::ops::RangeInclusive<usize> {
        match self.mode {
            TimeDependence::General => level..=(self.times.len() - 1 - level),
            _ => 0..=0,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn lambda(&self) -> f64 {
        self.lambdas[self.centre()]
    }

    pub fn pair(&self) -> &DiffeoPair {
        &self.pair
    }

    /// Transport flow `Phi(1; t)` at the requested time.
    pub fn transport_flow(&self) -> &OperatorMatrix {
        &self.flow
    }

    /// Current conjugated operator `V_n` at the requested time.
    pub fn operator(&self) -> &OperatorMatrix {
        self.v[self.centre()].as_ref().expect("centre is always populated")
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu[self.centre()]
    }

    pub fn steps(&self) -> &[ReductionStep] {
        &self.steps
    }

    fn log_derivative(&self, flows: &[Option<OperatorMatrix>], j: usize) -> Result<OperatorMatrix> {
        let get = |k: usize| flows[k].as_ref().expect("stencil neighbour present");
        match self.mode {
            TimeDependence::Autonomous => return Ok(OperatorMatrix::zeros(self.n, self.times[j])),
            TimeDependence::Comoving(c) => return comoving_log_derivative(get(j), c),
            TimeDependence::General => {}
        }
        Ok(flow_log_derivative(get(j - 1), get(j), get(j + 1), self.h)?
            .skew_part()
            .with_time(self.times[j]))
    }

    fn remainder(&self, j: usize) -> Result<OperatorMatrix> {
        let v = self.v[j].as_ref().expect("level data present");
        v.sub(&dispersion(self.n, self.times[j], self.lambdas[j], self.m))?
            .sub(&mu_operator(self.n, self.times[j], &self.mu[j]))
    }

    /// Remainder, fitted order and ledger check at the current level.
    pub fn current_step(&self) -> Result<ReductionStep> {
        let c = self.centre();
        let w = self.remainder(c)?;
        let fit = estimate_order_window(&w, 4, (self.n / 8) as i64, order_floor(self.operator()))?;
        let bound = self.m - self.level as f64 * self.ebar + self.slack;
        let step = ReductionStep {
            n: self.level,
            mu: self.mu[c].clone(),
            w,
            g: None,
            flow: None,
            flow_log_derivative: None,
            fitted_order_w: fit.slope,
            bound,
            hermiticity_residual: self.herm[c],
            mu_imag_max: self.mu_imag,
        };
        if fit.slope > bound {
            let mut ledger: Vec<LedgerEntry> =
                self.steps.iter().map(|s| s.ledger_entry()).collect();
            ledger.push(step.ledger_entry());
            return Err(Error::ReductionStall {
                step: self.level,
                fitted: fit.slope,
                bound,
                ledger,
            });
        }
        Ok(step)
    }

    /// One descent step: checks the ledger, solves the homological equation,
    /// conjugates by `exp(i G_n)` and folds `<w_n>_x` into `mu`.
    pub fn reduce_step(&mut self) -> Result<()> {
        if self.level >= self.n_k {
            return Err(Error::Contract(format!(
                "all {} levels already built",
                self.n_k
            )));
        }
        let mut step = self.current_step()?;
        let len = self.times.len();
        let mut flows: Vec<Option<OperatorMatrix>> = vec![None; len];
        let mut gens: Vec<Option<OperatorMatrix>> = vec![None; len];
        let mut mu_next = self.mu.clone();
        let mut mu_imag = self.mu_imag;
        for j in self.range(self.level) {
            let w = self.remainder(j)?;
            for (i, d) in w.diagonal_entries().into_iter().enumerate() {
                mu_next[j][i] = self.mu[j][i] + d.re;
                mu_imag = mu_imag.max(d.im.abs());
            }
            let sol = homological_solve(&w, self.lambdas[j], self.m)?;
            flows[j] = Some(exp_i_hermitian(&sol.g, 1.0)?.with_time(self.times[j]));
            gens[j] = Some(sol.g);
        }
        let mut v_next: Vec<Option<OperatorMatrix>> = vec![None; len];
        let mut herm_next = vec![0.0; len];
        let c = self.centre();
        for j in self.range(self.level + 1) {
            let d = self.log_derivative(&flows, j)?;
            let phi = flows[j].as_ref().expect("level data present");
            let (vn, res) =
                conjugate_step(phi, self.v[j].as_ref().expect("level data"), &d, self.sign)?;
            v_next[j] = Some(vn.with_time(self.times[j]));
            herm_next[j] = res;
            if j == c {
                step.flow_log_derivative = Some(d);
            }
        }
        step.g = gens[c].take();
        step.flow = flows[c].take();
        self.steps.push(step);
        self.v = v_next;
        self.herm = herm_next;
        self.mu = mu_next;
        self.mu_imag = mu_imag;
        self.level += 1;
        Ok(())
    }

    /// Closes the pipeline at level `N_K`.
    pub fn finish(mut self) -> Result<ReductionSample> {
        while self.level < self.n_k {
            self.reduce_step()?;
        }
        let last = self.current_step()?;
        let t = self.times[self.centre()];
        let n = self.n;
        let lambda = self.lambda();
        let lambda_k: Vec<f64> = (0..n)
            .map(|i| {
                let x = index_mode(n, i) as f64;
                lambda * x.abs().powf(self.m) * chi(x) + last.mu[i]
            })
            .collect();
        let w_k = last.w.clone();
        self.steps.push(last);
        let mut sample = ReductionSample {
            t,
            sign: self.sign,
            lambda,
            pair: self.pair,
            flow: self.flow,
            flow_log_derivative: self.flow_log_derivative,
            v: self.original,
            steps: self.steps,
            lambda_k,
            w_k,
            conjugation_residual: 0.0,
        };
        sample.conjugation_residual = conjugation_defect(&sample, (n / 4) as i64)?;
        Ok(sample)
    }
}

/// Highest-order step at time `t`: straightens `V |D|^M` to `lambda(t) |D|^M`
/// by the transport flow and returns the level-1 state. Without a declared
/// travelling speed, time-dependent problems are built on a stencil of
/// `2 N_K + 1` times spaced `h_t`.
pub fn reduce_highest_order(
    spec: &ProblemSpec,
    t: f64,
    opts: &ReductionOptions,
) -> Result<ReductionState> {
    let n = spec.n;
    let n_k = spec.n_steps();
    let mode = spec.time_dependence();
    let h = opts.h_t;
    let times: Vec<f64> = if mode == TimeDependence::General {
        if !(h > 0.0) {
            return Err(Error::Contract(format!("h_t = {h} must be positive")));
        }
        (0..=2 * n_k)
            .map(|j| t + (j as f64 - n_k as f64) * h)
            .collect()
    } else {
        vec![t]
    };
    let len = times.len();
    let mut pairs = Vec::with_capacity(len);
    let mut lambdas = Vec::with_capacity(len);
    let mut phis = Vec::with_capacity(len);
    let mut vs = Vec::with_capacity(len);
    for &tj in &times {
        let (pair, lambda) = DiffeoPair::from_potential(&spec.potential, tj, spec.m, n)?;
        phis.push(Some(transport_flow(&pair, opts.substeps)?));
        pairs.push(pair);
        lambdas.push(lambda);
        vs.push(spec.operator(tj)?);
    }
    let centre = len / 2;
    let mut state = ReductionState {
        m: spec.m,
        ebar: spec.ebar(),
        n_k,
        n,
        slack: opts.slack,
        h,
        mode,
        sign: opts.sign,
        times,
        lambdas,
        level: 1,
        v: vec![None; len],
        herm: vec![0.0; len],
        mu: vec![vec![0.0; n]; len],
        mu_imag: 0.0,
        steps: Vec::with_capacity(n_k),
        pair: pairs.swap_remove(centre),
        flow: phis[centre].clone().expect("centre flow"),
        flow_log_derivative: OperatorMatrix::zeros(n, t),
        original: vs[centre].clone(),
    };
    state.flow_log_derivative = state.log_derivative(&phis, centre)?;
    for j in state.range(1) {
        let d = state.log_derivative(&phis, j)?;
        let phi = phis[j].as_ref().expect("level 0 flow");
        let (v1, res) = conjugate_step(phi, &vs[j], &d, state.sign)?;
        state.v[j] = Some(v1.with_time(state.times[j]));
        state.herm[j] = res;
    }
    Ok(state)
}

/// Reduces the problem at time `t`.
pub fn reduce_at(spec: &ProblemSpec, t: f64, opts: &ReductionOptions) -> Result<ReductionSample> {
    reduce_highest_order(spec, t, opts)?.finish()
}

/// Max-entry defect on `|xi| <= half_width` of
/// `T_K^{-1}(s i V T_K - d_t T_K) = s i(Lambda_K + W_K)`.
pub fn conjugation_defect(sample: &ReductionSample, half_width: i64) -> Result<f64> {
    let tk = sample.tk()?;
    let dtk = sample.tk_derivative()?;
    let si = C64::new(0.0, sample.sign.factor());
    let iv = sample.v.scale(si);
    let pushed = tk.adjoint().matmul(&iv.matmul(&tk)?.sub(&dtk)?)?;
    let target = sample
        .lambda_k_operator()
        .add(&sample.w_k)?
        .scale(si);
    pushed.block_max_diff(&target, half_width)
}

/// Runs the reduction at each sample time.
pub fn run_reduction(
    spec: &ProblemSpec,
    times: &[f64],
    opts: &ReductionOptions,
) -> Result<ReductionResult> {
    // samples are independent; collecting in order keeps the output and the
    // reported error (the earliest failing time) schedule independent
    let samples = times
        .par_iter()
        .map(|&t| reduce_at(spec, t, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ReductionResult {
        time_dependence: spec.time_dependence(),
        sign: opts.sign,
        m: spec.m,
        ebar: spec.ebar(),
        k: spec.k,
        n_k: spec.n_steps(),
        n: spec.n,
        samples,
    })
}

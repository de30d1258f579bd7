//! Sobolev-norm growth: measured norms against the linear envelope built
//! from the reduction, and the interpolation inequality for the accumulated
//! propagator.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pdo_calculus::OperatorMatrix;
use crate::torus_fourier::GridFunction;

use super::integrator::{operator_norm, operator_norm_block, propagate, propagator_snapshots, Generator, Trajectory};
use super::reduced::ReducedModel;

/// Relative slack allowed in the interpolation inequality.
pub const INTERPOLATION_SLACK: f64 = 0.05;

/// Rounding allowance on the envelope ratio; at `t0` with `c1 = 1` the ratio
/// is 1 up to the error of the singular values.
pub const ENVELOPE_ROUNDING: f64 = 1e-10;

/// Constants of `||u(t)||_{H^s} <= c1 ||u0||_{H^s} + c2 |t - t0| ||u0||_{L^2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeConstants {
    pub s: f64,
    /// `sup ||T_K||_{B(H^s)}` over the reduction samples.
    pub tk_norm: f64,
    /// `sup ||T_K^{-1}||_{B(H^s)}`.
    pub tk_inv_norm: f64,
    /// `sup ||W_K||_{B(L^2, H^s)}`.
    pub wk_norm: f64,
    /// The same norm restricted to `|xi| <= N/4`, away from the aliased
    /// modes near the grid edge that dominate `wk_norm`. Informational.
    pub wk_norm_headroom: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Envelope constants measured on the reduction samples. For travelling data
/// the norms do not depend on time, so one sample gives the supremum.
pub fn envelope_constants(model: &ReducedModel, s: f64) -> Result<EnvelopeConstants> {
    let (mut tk_norm, mut tk_inv_norm, mut wk_norm) = (0.0f64, 0.0f64, 0.0f64);
    let mut wk_norm_headroom = 0.0f64;
    let quarter = (model.grid_size() / 4) as i64;
    for t in model.sample_times() {
        let tk = model.tk(t)?;
        tk_norm = tk_norm.max(operator_norm(&tk, s, s)?);
        tk_inv_norm = tk_inv_norm.max(operator_norm(&tk.adjoint(), s, s)?);
        let wk = model.w_k(t)?;
        wk_norm = wk_norm.max(operator_norm(&wk, 0.0, s)?);
        wk_norm_headroom = wk_norm_headroom.max(operator_norm_block(&wk, 0.0, s, quarter)?);
    }
    Ok(EnvelopeConstants {
        s,
        tk_norm,
        tk_inv_norm,
        wk_norm,
        wk_norm_headroom,
        c1: tk_norm * tk_inv_norm,
        c2: tk_norm * wk_norm,
    })
}

/// Envelope check for one Sobolev index.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub constants: EnvelopeConstants,
    /// `max_t ||u(t)||_{H^s} / envelope(t)`.
    pub max_ratio: f64,
    pub passed: bool,
}

/// One row of the interpolation table.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationRow {
    pub t: f64,
    pub s0: f64,
    pub s: f64,
    pub s1: f64,
    /// `||U||_{B(H^s)}`.
    pub lhs: f64,
    /// `||U||_{B(H^{s0})}^{1-theta} ||U||_{B(H^{s1})}^theta`.
    pub rhs: f64,
    pub passed: bool,
}

/// Interpolation inequality for `U` at `s0 < s < s1`.
pub fn interpolation_check(u: &OperatorMatrix, s0: f64, s: f64, s1: f64) -> Result<InterpolationRow> {
    if !(s0 < s && s < s1) {
        return Err(Error::Contract(format!(
            "interpolation needs s0 < s < s1, got ({s0}, {s}, {s1})"
        )));
    }
    let theta = (s - s0) / (s1 - s0);
    let lhs = operator_norm(u, s, s)?;
    let rhs = operator_norm(u, s0, s0)?.powf(1.0 - theta) * operator_norm(u, s1, s1)?.powf(theta);
    Ok(InterpolationRow {
        t: u.time(),
        s0,
        s,
        s1,
        lhs,
        rhs,
        passed: lhs <= (1.0 + INTERPOLATION_SLACK) * rhs,
    })
}

/// Parameters of a growth run.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthOptions {
    pub s_list: Vec<f64>,
    pub t0: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Times at which the accumulated propagator is formed.
    pub interpolation_times: Vec<f64>,
    /// `(s0, s, s1)`.
    pub interpolation_triple: (f64, f64, f64),
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub trajectory: Trajectory,
    pub s_list: Vec<f64>,
    /// Least-squares slope of `log ||u(t)||_{H^s}` against `log(1 + t - t0)`.
    pub slopes: Vec<f64>,
    pub envelopes: Vec<EnvelopeCheck>,
    pub interpolation: Vec<InterpolationRow>,
}

fn log_slope(ts: &[f64], ns: &[f64], t0: f64) -> f64 {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ns)
        .filter(|(t, n)| **t > t0 && **n > 0.0)
        .map(|(t, n)| ((1.0 + t - t0).ln(), n.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.envelopes.iter().all(|e| e.passed) && self.interpolation.iter().all(|r| r.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[slopes]\n");
        for (s, k) in self.s_list.iter().zip(&self.slopes) {
            let _ = writeln!(out, "s = {s}: d log||u||_H^s / d log(1+t) = {k:.6e}");
        }
        out.push_str("\n[envelope]\n");
        for e in &self.envelopes {
            let c = &e.constants;
            let _ = writeln!(
                out,
                "s = {}: |T_K| = {:.6e}, |T_K^-1| = {:.6e}, |W_K|_(L2,Hs) = {:.6e} (headroom block {:.6e}), c1 = {:.6e}, c2 = {:.6e}, max ratio = {:.6e}, {}",
                c.s,
                c.tk_norm,
                c.tk_inv_norm,
                c.wk_norm,
                c.wk_norm_headroom,
                c.c1,
                c.c2,
                e.max_ratio,
                if e.passed { "pass" } else { "FAIL" }
            );
        }
        out.push_str("\n[interpolation]\nt,s0,s,s1,lhs,rhs,ratio,status\n");
        for r in &self.interpolation {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6e},{:.6e},{:.6e},{}",
                r.t,
                r.s0,
                r.s,
                r.s1,
                r.lhs,
                r.rhs,
                r.lhs / r.rhs,
                if r.passed { "pass" } else { "FAIL" }
            );
        }
        out
    }
}

/// Propagates `u0`, fits growth slopes, checks the linear envelope for each
/// `s` and the interpolation inequality for the accumulated propagator.
pub fn growth_experiment(
    gen: &Generator,
    model: &ReducedModel,
    u0: &GridFunction,
    opts: &GrowthOptions,
) -> Result<GrowthReport> {
    let trajectory = propagate(gen, u0, opts.t0, opts.t_final, opts.dt)?;
    let l2_0 = trajectory.norms(0.0)[0];
    let mut slopes = Vec::with_capacity(opts.s_list.len());
    let mut envelopes = Vec::with_capacity(opts.s_list.len());
    for &s in &opts.s_list {
        let ns = trajectory.norms(s);
        slopes.push(log_slope(&trajectory.times, &ns, opts.t0));
        let constants = envelope_constants(model, s)?;
        let max_ratio = trajectory
            .times
            .iter()
            .zip(&ns)
            .map(|(t, n)| {
                let env = constants.c1 * ns[0] + constants.c2 * (t - opts.t0).abs() * l2_0;
                n / env.max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        envelopes.push(EnvelopeCheck {
            constants,
            max_ratio,
            passed: max_ratio <= 1.0 + ENVELOPE_ROUNDING,
        });
    }
    let (s0, s, s1) = opts.interpolation_triple;
    let mut interpolation = Vec::new();
    if !opts.interpolation_times.is_empty() {
        for u in propagator_snapshots(gen, opts.t0, &opts.interpolation_times, opts.dt)? {
            interpolation.push(interpolation_check(&u, s0, s, s1)?);
        }
    }
    Ok(GrowthReport {
        trajectory,
        s_list: opts.s_list.clone(),
        slopes,
        envelopes,
        interpolation,
    })
}

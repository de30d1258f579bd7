//! Run configuration: TOML with the sections below. Expressions use the
//! grammar of [`super::expr`].
//!
//! ```toml
//! seed = 7                        # optional, default 0
//!
//! [grid]
//! n = 128
//!
//! [operator]
//! m = 2.0
//! frak_e = 1.0                    # optional when w is zero
//! v = "1 + 0.25*cos(x)"
//! w = "0.1*cos(x)*|xi|*chi"       # optional, default "0"
//! w_order = 1.0                   # optional, inferred from the xi-degree
//! comoving_speed = 1.0            # optional: data depend on x - c t only
//!
//! [reduction]
//! k = 2                           # or s = 1.5 (then k = [s] + 1)
//! substeps = 32
//! h_t = 1e-3
//! times = [0.0]                   # default [t0]
//! orientation = "minus"           # u_t = -i V u ("plus": u_t = +i V u)
//!
//! [time]
//! t0 = 0.0
//! t1 = 1.0
//! dt = 1e-3
//!
//! [initial]
//! u0 = "exp(cos(x))"
//!
//! [growth]
//! s_list = [0, 1, 2]
//! interpolation_times = [1, 5, 10]
//! interpolation_triple = [0, 2, 8]
//! cross_check = true
//! cross_check_span = 1.0
//!
//! [output]
//! dir = "out"
//! ```

use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use crate::diffeo_transport::Potential;
use crate::error::{Error, Hypothesis, Result};
use crate::normal_form::{k_from_s, CheckReport, EvolutionSign, ProblemSpec, ReductionOptions};
use crate::pdo_calculus::Symbol;
use crate::propagator::GrowthOptions;
use crate::torus_fourier::{check_grid_size, nodes, GridFunction};

use super::expr::Expr;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    grid: RawGrid,
    operator: RawOperator,
    reduction: RawReduction,
    time: Option<RawTime>,
    initial: Option<RawInitial>,
    growth: Option<RawGrowth>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    m: f64,
    frak_e: Option<f64>,
    v: Spanned<String>,
    w: Option<Spanned<String>>,
    w_order: Option<f64>,
    comoving_speed: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReduction {
    k: Option<usize>,
    s: Option<f64>,
    substeps: Option<usize>,
    h_t: Option<f64>,
    times: Option<Vec<f64>>,
    orientation: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t0: Option<f64>,
    t1: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    u0: Spanned<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrowth {
    s_list: Option<Vec<f64>>,
    interpolation_times: Option<Vec<f64>>,
    interpolation_triple: Option<[f64; 3]>,
    cross_check: Option<bool>,
    cross_check_span: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub seed: u64,
    pub n: usize,
    pub m: f64,
    pub frak_e: f64,
    pub v: Expr,
    pub w: Expr,
    pub w_order: f64,
    pub comoving_speed: Option<f64>,
    pub k: usize,
    pub s: Option<f64>,
    pub substeps: usize,
    pub h_t: f64,
    pub reduction_times: Vec<f64>,
    pub sign: EvolutionSign,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub u0: Expr,
    pub s_list: Vec<f64>,
    pub interpolation_times: Vec<f64>,
    pub interpolation_triple: (f64, f64, f64),
    pub cross_check: bool,
    pub cross_check_span: f64,
    pub output_dir: Option<PathBuf>,
    /// `inf V` over the validation grid and times.
    pub delta: f64,
    /// Outcome of the hypothesis checks.
    pub reports: Vec<CheckReport>,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn config_error(text: &str, offset: usize, msg: impl Into<String>) -> Error {
    let (line, col) = line_col(text, offset);
    Error::Config {
        line,
        col,
        msg: msg.into(),
    }
}

/// Parses an expression held in a TOML string, relocating syntax errors to
/// the position in the file.
fn parse_expr(text: &str, value: &Spanned<String>, key: &str) -> Result<Expr> {
    Expr::parse(value.get_ref()).map_err(|e| match e {
        Error::Config { col, msg, .. } => {
            // skip the opening quote, then `col - 1` characters
            let start = value.span().start + 1;
            let offset = value.get_ref()
                .char_indices()
                .nth(col.saturating_sub(1))
                .map_or(value.get_ref().len(), |(b, _)| b);
            config_error(text, start + offset, format!("{key}: {msg}"))
        }
        other => other,
    })
}

fn require_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config {
            line: 0,
            col: 0,
            msg: format!("{name} must be finite, got {v}"),
        })
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config {
        line: 0,
        col: 0,
        msg: msg.into(),
    }
}

/// Parses and validates a configuration, running the hypothesis checks.
pub fn parse_config(text: &str) -> Result<Config> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        config_error(text, offset, e.message().trim().to_string())
    })?;

    let n = overrides.grid.unwrap_or(raw.grid.n);
    check_grid_size(n).map_err(|e| invalid(e.to_string()))?;
    let seed = overrides.seed.or(raw.seed).unwrap_or(0);

    let op = &raw.operator;
    let m = require_finite("operator.m", op.m)?;
    let v = parse_expr(text, &op.v, "operator.v")?;
    let w = match &op.w {
        Some(w) => parse_expr(text, w, "operator.w")?,
        None => Expr::parse("0")?,
    };
    if v.depends_on_xi() {
        return Err(invalid("operator.v must not depend on xi"));
    }
    let w_order = match op.w_order {
        Some(o) => require_finite("operator.w_order", o)?,
        None => w.xi_degree()?,
    };
    let w_is_zero = w_order == f64::NEG_INFINITY;
    let frak_e = match op.frak_e {
        Some(e) => require_finite("operator.frak_e", e)?,
        None if w_is_zero => 1.0,
        None => return Err(invalid("operator.frak_e is required when w is nonzero")),
    };
    if let Some(c) = op.comoving_speed {
        require_finite("operator.comoving_speed", c)?;
    }

    let red = &raw.reduction;
    let (k, s) = match (red.k, red.s) {
        (Some(_), Some(_)) => return Err(invalid("give either reduction.k or reduction.s, not both")),
        (Some(k), None) => (k, None),
        (None, Some(s)) => {
            let s = require_finite("reduction.s", s)?;
            if s < 0.0 {
                return Err(invalid(format!("reduction.s = {s} must be nonnegative")));
            }
            (k_from_s(s), Some(s))
        }
        (None, None) => return Err(invalid("reduction.k or reduction.s is required")),
    };
    let defaults = ReductionOptions::default();
    let substeps = red.substeps.unwrap_or(defaults.substeps);
    if substeps == 0 {
        return Err(invalid("reduction.substeps must be positive"));
    }
    let h_t = require_finite("reduction.h_t", red.h_t.unwrap_or(defaults.h_t))?;
    if !(h_t > 0.0) {
        return Err(invalid(format!("reduction.h_t = {h_t} must be positive")));
    }
    let sign = match &red.orientation {
        None => EvolutionSign::default(),
        Some(o) => match o.get_ref().as_str() {
            "minus" => EvolutionSign::Minus,
            "plus" => EvolutionSign::Plus,
            other => {
                return Err(config_error(
                    text,
                    o.span().start,
                    format!("reduction.orientation must be \"minus\" or \"plus\", got \"{other}\""),
                ))
            }
        },
    };

    let time = raw.time.as_ref();
    let t0 = require_finite("time.t0", time.and_then(|t| t.t0).unwrap_or(0.0))?;
    let t1 = require_finite("time.t1", time.and_then(|t| t.t1).unwrap_or(t0 + 1.0))?;
    let dt = require_finite("time.dt", time.and_then(|t| t.dt).unwrap_or(1e-3))?;
    if !(dt > 0.0) {
        return Err(invalid(format!("time.dt = {dt} must be positive")));
    }
    let reduction_times = red.times.clone().unwrap_or_else(|| vec![t0]);
    if reduction_times.is_empty() {
        return Err(invalid("reduction.times must not be empty"));
    }
    for &t in &reduction_times {
        require_finite("reduction.times", t)?;
    }

    let u0 = match &raw.initial {
        Some(i) => parse_expr(text, &i.u0, "initial.u0")?,
        None => Expr::parse("exp(cos(x))")?,
    };
    if u0.depends_on_xi() {
        return Err(invalid("initial.u0 must not depend on xi"));
    }

    let growth = raw.growth.as_ref();
    let s_list = growth
        .and_then(|g| g.s_list.clone())
        .unwrap_or_else(|| vec![0.0, 1.0, 2.0]);
    let interpolation_times = growth
        .and_then(|g| g.interpolation_times.clone())
        .unwrap_or_default();
    let [s0, si, s1] = growth
        .and_then(|g| g.interpolation_triple)
        .unwrap_or([0.0, 2.0, 8.0]);
    if !(s0 < si && si < s1) {
        return Err(invalid(format!(
            "growth.interpolation_triple must be increasing, got [{s0}, {si}, {s1}]"
        )));
    }
    for &v in s_list.iter().chain(&interpolation_times) {
        require_finite("growth", v)?;
    }
    let cross_check = growth.and_then(|g| g.cross_check).unwrap_or(false);
    let cross_check_span = require_finite(
        "growth.cross_check_span",
        growth.and_then(|g| g.cross_check_span).unwrap_or(1.0),
    )?;

    let output_dir = overrides
        .output_dir
        .clone()
        .or_else(|| raw.output.and_then(|o| o.dir).map(PathBuf::from));

    let mut cfg = Config {
        seed,
        n,
        m,
        frak_e,
        v,
        w,
        w_order,
        comoving_speed: op.comoving_speed,
        k,
        s,
        substeps,
        h_t,
        reduction_times,
        sign,
        t0,
        t1,
        dt,
        u0,
        s_list,
        interpolation_times,
        interpolation_triple: (s0, si, s1),
        cross_check,
        cross_check_span,
        output_dir,
        delta: f64::NAN,
        reports: Vec::new(),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl Config {
    /// Times at which the hypotheses are checked.
    fn check_times(&self) -> Vec<f64> {
        let mut ts = self.reduction_times.clone();
        if self.v.depends_on_t() || self.w.depends_on_t() {
            for j in 0..=8 {
                ts.push(self.t0 + (self.t1 - self.t0) * j as f64 / 8.0);
            }
        }
        ts
    }

    fn validate(&mut self) -> Result<()> {
        // a complex potential breaks self-adjointness of the leading term
        let fine = 4 * self.n;
        for &t in &self.check_times() {
            for x in nodes(fine) {
                let val = self.v.eval(t, x, 0.0).v;
                if val.im.abs() > 1e-14 * val.re.abs().max(1.0) {
                    return Err(Error::hypothesis(
                        Hypothesis::H1,
                        format!("V is not real at t = {t}, x = {x:.6}: {val}"),
                    ));
                }
            }
        }
        let spec = self.problem_spec()?;
        let times = self.check_times();
        self.reports = spec.validate(&times)?;
        self.delta = times
            .iter()
            .map(|&t| spec.potential.check_positive(t, fine))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        Ok(())
    }

    pub fn potential(&self) -> Potential {
        let v = self.v.clone();
        Potential::new(self.v.source().to_string(), !self.v.depends_on_t(), move |t, x| {
            v.eval(t, x, 0.0).v.re
        })
    }

    pub fn w_symbol(&self) -> Result<Symbol> {
        if self.w_order == f64::NEG_INFINITY {
            return Ok(Symbol::zero());
        }
        self.w.to_symbol(Some(self.w_order))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec::new(
            self.m,
            self.frak_e,
            self.potential(),
            self.w_symbol()?,
            !self.w.depends_on_t(),
            self.k,
            self.n,
        )?;
        match self.comoving_speed {
            Some(c) if !spec.is_autonomous() => spec.with_comoving_speed(c),
            _ => Ok(spec),
        }
    }

    pub fn reduction_options(&self) -> ReductionOptions {
        ReductionOptions {
            substeps: self.substeps,
            h_t: self.h_t,
            sign: self.sign,
            ..ReductionOptions::default()
        }
    }

    pub fn initial_state(&self) -> Result<GridFunction> {
        let u0 = self.u0.clone();
        let t0 = self.t0;
        GridFunction::from_fn(self.n, move |x| u0.eval(t0, x, 0.0).v)
    }

    pub fn growth_options(&self) -> GrowthOptions {
        GrowthOptions {
            s_list: self.s_list.clone(),
            t0: self.t0,
            t_final: self.t1,
            dt: self.dt,
            interpolation_times: self.interpolation_times.clone(),
            interpolation_triple: self.interpolation_triple,
        }
    }
}

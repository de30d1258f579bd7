//! Subcommand drivers. Each writes its artifacts atomically into the output
//! directory and returns a short text summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::normal_form::{run_reduction, ReductionResult};
use crate::propagator::{
    cross_propagation_error, growth_experiment, propagate, propagate_reduced, Generator,
    GrowthReport, ReducedModel,
};

use super::config::Config;
use super::suites::run_calculus_suites;

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &target)?;
    Ok(target)
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub passed: bool,
}

fn output_dir(cfg: &Config) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn hypotheses_text(cfg: &Config) -> String {
    let mut s = format!("delta = {:.17e}\n", cfg.delta);
    for r in &cfg.reports {
        let _ = writeln!(
            s,
            "{}: {} ({})",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.detail
        );
    }
    s
}

/// Runs the Fourier and calculus property suites.
pub fn cmd_verify_calculus(cfg: &Config) -> Result<CommandOutcome> {
    let report = run_calculus_suites(cfg.n, cfg.seed)?;
    let dir = output_dir(cfg);
    let files = vec![
        write_atomic(&dir, "verify_calculus.txt", &report.to_text())?,
        write_atomic(&dir, "verify_calculus.csv", &report.to_csv())?,
    ];
    Ok(CommandOutcome {
        files,
        summary: report.to_text(),
        passed: report.passed(),
    })
}

fn write_ledger_on_stall(dir: &Path, err: &Error) -> Result<()> {
    if let Error::ReductionStall { ledger, .. } = err {
        let mut s = String::from("step,fitted_order_w,bound,hermiticity_residual,mu_linf\n");
        for e in ledger {
            let _ = writeln!(
                s,
                "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                e.step, e.fitted_order, e.bound, e.hermiticity_residual, e.mu_linf
            );
        }
        write_atomic(dir, "ledger_stall.csv", &s)?;
    }
    Ok(())
}

fn reduce(cfg: &Config) -> Result<ReductionResult> {
    let spec = cfg.problem_spec()?;
    let res = run_reduction(&spec, &cfg.reduction_times, &cfg.reduction_options());
    if let Err(e) = &res {
        write_ledger_on_stall(&output_dir(cfg), e)?;
    }
    res
}

fn reduction_summary(res: &ReductionResult) -> String {
    let mut s = format!(
        "M = {}, ebar = {}, K = {}, N_K = {}, N = {}\n",
        res.m, res.ebar, res.k, res.n_k, res.n
    );
    for smp in &res.samples {
        let _ = writeln!(
            s,
            "t = {}: lambda = {:.12e}, conjugation residual = {:.3e}",
            smp.t, smp.lambda, smp.conjugation_residual
        );
        for e in smp.ledger() {
            let _ = writeln!(
                s,
                "  step {}: fitted order {:.4} (bound {:.4}), hermiticity {:.3e}, |mu|_inf {:.6e}",
                e.step, e.fitted_order, e.bound, e.hermiticity_residual, e.mu_linf
            );
        }
    }
    s
}

/// Runs the reduction and writes the ledger, `lambda(t)`, `lambda_K`, the
/// remainders `W_K` and a JSON summary.
pub fn cmd_reduce(cfg: &Config) -> Result<CommandOutcome> {
    let res = reduce(cfg)?;
    let dir = output_dir(cfg);
    let mut files = vec![
        write_atomic(&dir, "hypotheses.txt", &hypotheses_text(cfg))?,
        write_atomic(&dir, "ledger.csv", &res.ledger_csv())?,
        write_atomic(&dir, "lambda.csv", &res.lambda_csv())?,
        write_atomic(&dir, "lambda_k.csv", &res.lambda_k_csv())?,
        write_atomic(&dir, "summary.json", &res.summary_json())?,
    ];
    for (i, smp) in res.samples.iter().enumerate() {
        files.push(write_atomic(&dir, &format!("w_k_{i}.csv"), &smp.w_k.to_csv())?);
    }
    Ok(CommandOutcome {
        files,
        summary: reduction_summary(&res),
        passed: true,
    })
}

/// Integrates the original equation from the configured initial state.
pub fn cmd_propagate(cfg: &Config) -> Result<CommandOutcome> {
    let spec = cfg.problem_spec()?;
    let gen = Generator::from_spec(&spec)?;
    let u0 = cfg.initial_state()?;
    let tr = propagate(&gen, &u0, cfg.t0, cfg.t1, cfg.dt)?;
    let dir = output_dir(cfg);
    let drift = tr.l2_drift();
    let summary = format!(
        "propagated over [{}, {}] with dt = {}: {} samples, relative L2 drift {:.3e}\n",
        cfg.t0,
        cfg.t1,
        cfg.dt,
        tr.times.len(),
        drift
    );
    let files = vec![
        write_atomic(&dir, "trajectory.csv", &tr.to_csv(&cfg.s_list))?,
        write_atomic(&dir, "final_state.csv", &tr.final_state().to_csv())?,
        write_atomic(&dir, "propagate.txt", &summary)?,
    ];
    Ok(CommandOutcome {
        files,
        summary,
        passed: true,
    })
}

fn interpolation_csv(report: &GrowthReport) -> String {
    let mut s = String::from("t,s0,s,s1,lhs,rhs,status\n");
    for r in &report.interpolation {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.17e},{:.17e},{}",
            r.t,
            r.s0,
            r.s,
            r.s1,
            r.lhs,
            r.rhs,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    s
}

fn envelope_csv(report: &GrowthReport) -> String {
    let mut s = String::from("s,tk_norm,tk_inv_norm,wk_norm,wk_norm_headroom,c1,c2,max_ratio,slope,status\n");
    for (e, k) in report.envelopes.iter().zip(&report.slopes) {
        let c = &e.constants;
        let _ = writeln!(
            s,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            c.s,
            c.tk_norm,
            c.tk_inv_norm,
            c.wk_norm,
            c.wk_norm_headroom,
            c.c1,
            c.c2,
            e.max_ratio,
            k,
            if e.passed { "pass" } else { "FAIL" }
        );
    }
    s
}

/// Reduction, growth experiment and (optionally) the reduced-versus-original
/// cross-check.
pub fn cmd_growth(cfg: &Config) -> Result<CommandOutcome> {
    let res = reduce(cfg)?;
    let model = ReducedModel::from_result(&res)?;
    let spec = cfg.problem_spec()?;
    let gen = Generator::from_spec(&spec)?;
    let u0 = cfg.initial_state()?;
    let report = growth_experiment(&gen, &model, &u0, &cfg.growth_options())?;
    let dir = output_dir(cfg);
    let mut summary = report.to_text();
    let mut files = vec![
        write_atomic(&dir, "ledger.csv", &res.ledger_csv())?,
        write_atomic(&dir, "trajectory.csv", &report.trajectory.to_csv(&cfg.s_list))?,
        write_atomic(&dir, "envelope.csv", &envelope_csv(&report))?,
        write_atomic(&dir, "interpolation.csv", &interpolation_csv(&report))?,
    ];
    if cfg.cross_check {
        let t1 = cfg.t0 + cfg.cross_check_span;
        let err = cross_propagation_error(&model, &gen, &u0, cfg.t0, t1, cfg.dt)?;
        let _ = writeln!(
            summary,
            "\n[cross-check]\nreduced vs original over [{}, {t1}]: sup error {err:.6e}",
            cfg.t0
        );
        let reduced = propagate_reduced(&model, &u0, cfg.t0, t1, cfg.dt)?;
        files.push(write_atomic(
            &dir,
            "reduced_trajectory.csv",
            &reduced.to_csv(&cfg.s_list),
        )?);
    }
    files.push(write_atomic(&dir, "growth_report.txt", &summary)?);
    Ok(CommandOutcome {
        files,
        summary,
        passed: report.passed(),
    })
}

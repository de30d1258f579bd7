//! Error taxonomy shared by every module and its mapping onto process exit codes.

use thiserror::Error;

/// Which structural hypothesis a rejected input violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Self-adjointness / reality of the operator symbols.
    H1,
    /// Strict positivity of the leading coefficient.
    H2,
    /// Order gap between the perturbation and the leading term.
    H3,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
        };
        f.write_str(s)
    }
}

/// One row of the reduction order ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub step: usize,
    pub fitted_order: f64,
    pub bound: f64,
    pub hermiticity_residual: f64,
    pub mu_linf: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("symbol evaluation failed at t={t}, x={x}, xi={xi}: non-finite value")]
    Evaluation { t: f64, x: f64, xi: f64 },

    #[error("hypothesis {check} violated: {detail}")]
    Hypothesis { check: Hypothesis, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("order fit window has {points} points (need at least {needed})")]
    InsufficientWindow { points: usize, needed: usize },

    #[error("reduction stalled at step {step}: fitted order {fitted:.4} exceeds bound {bound:.4}")]
    ReductionStall {
        step: usize,
        fitted: f64,
        bound: f64,
        ledger: Vec<LedgerEntry>,
    },

    #[error("config error at line {line}, column {col}: {msg}")]
    Config { line: usize, col: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn hypothesis(check: Hypothesis, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            check,
            detail: detail.into(),
        }
    }

    /// Process exit code: 1 hypothesis violation, 2 numerical failure,
    /// 3 ledger or contract violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis { .. } => 1,
            Error::Numerical(_) | Error::Evaluation { .. } => 2,
            Error::ReductionStall { .. }
            | Error::Contract(_)
            | Error::Dimension(_)
            | Error::InsufficientWindow { .. }
            | Error::Config { .. }
            | Error::Io(_) => 3,
        }
    }
}

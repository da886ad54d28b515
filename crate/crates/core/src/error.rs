use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("product space would have {count} outcomes, cap is {cap}")]
    SizeCap { count: u128, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("arbitrage detected: {0}")]
    Arbitrage(String),

    #[error("no martingale measure: {0}")]
    NoMartingaleMeasure(String),

    #[error("solver did not converge: {reason} (residual {residual:e})")]
    NonConvergence { reason: String, residual: f64 },

    #[error("inconsistent solver output: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Lp(#[from] LpError),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            got,
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) | Error::SizeCap { .. } | Error::Dimension { .. } => "validation",
            Error::Precondition(_) => "precondition",
            Error::Arbitrage(_) => "arbitrage",
            Error::NoMartingaleMeasure(_) => "infeasible",
            Error::NonConvergence { .. } | Error::Inconsistent(_) => "numerical",
            Error::Lp(e) => e.kind(),
        }
    }
}

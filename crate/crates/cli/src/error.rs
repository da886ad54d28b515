use std::fmt;

use thiserror::Error;

/// Error class; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Infeasible,
    Arbitrage,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Infeasible | ErrorKind::Arbitrage => 2,
            ErrorKind::Numerical => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Infeasible => "infeasible",
            ErrorKind::Arbitrage => "arbitrage",
            ErrorKind::Numerical => "numerical",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error)]
#[error("kind={kind} reason={reason:?}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub reason: String,
}

impl CliError {
    pub fn validation(reason: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            reason: reason.into(),
        }
    }

    pub fn numerical(reason: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Numerical,
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl From<apt_core::Error> for CliError {
    fn from(e: apt_core::Error) -> Self {
        let kind = match e.kind() {
            "validation" | "precondition" => ErrorKind::Validation,
            "arbitrage" => ErrorKind::Arbitrage,
            "infeasible" => ErrorKind::Infeasible,
            _ => ErrorKind::Numerical,
        };
        Self {
            kind,
            reason: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation(format!("io: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::validation(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::validation(format!("spec: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

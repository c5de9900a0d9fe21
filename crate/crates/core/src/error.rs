use std::fmt;

use thiserror::Error;

/// Which argument of a correlation had no spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Predicted,
    Observed,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Predicted => f.write_str("predicted"),
            Side::Observed => f.write_str("observed"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A value handed to a constructor or operation is out of its domain.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A JSONL line could not be decoded or failed record validation.
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// The record set is structurally inconsistent (gaps, wrong counts, mixed strategies).
    #[error("invalid log: {0}")]
    InvalidLog(String),

    #[error("{what} is empty")]
    Empty { what: &'static str },

    #[error("pearson correlation undefined: {side} values have zero variance")]
    ZeroVariance { side: Side },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 1 usage, 2 data validation, 3 numeric or degenerate analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } => 1,
            Error::Parse { .. }
            | Error::InvalidLog(_)
            | Error::Empty { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::ZeroVariance { .. } | Error::Degenerate(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("iteration {iter} is out of range for a schedule of {total} iterations")]
    OutOfRange { iter: u64, total: u64 },

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {what}")]
    Numeric { what: String },

    #[error("{path}: malformed IDX data at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("inconsistent data: {0}")]
    Consistency(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no valid coordinates for a learning-rate estimate")]
    NoEstimate,

    #[error("training diverged at iteration {iteration} (loss {loss})")]
    Diverged { iteration: u64, loss: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Validation(_) | Error::OutOfRange { .. } | Error::Config { .. } => "validation",
            Error::Dimension { .. } | Error::Consistency(_) => "consistency",
            Error::Numeric { .. } => "numeric",
            Error::Format { .. } => "format",
            Error::InsufficientData(_) | Error::NoEstimate => "insufficient-data",
            Error::Diverged { .. } => "divergence",
            Error::Io { .. } | Error::Csv(_) => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}

pub(crate) fn check_len(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            what: what.to_string(),
            expected,
            actual,
        })
    }
}

pub(crate) fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric {
            what: what.to_string(),
        })
    }
}

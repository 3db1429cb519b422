use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{what} = {value} is outside the admissible domain ({domain})")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// A problem or configuration failed validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Successive approximation hit its iteration cap before the increment fell below tolerance.
    #[error("kernel iteration did not converge after {iterations} sweeps (last increment {increment:e}, tol {tol:e})")]
    NonConvergence {
        iterations: usize,
        increment: f64,
        tol: f64,
    },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A kernel was used before its boundary derivative trace was computed.
    #[error("kernel derivative trace k_x(1, .) has not been computed")]
    MissingTrace,

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The closed-loop state exceeded the blow-up threshold.
    #[error("simulation diverged at t = {time}: sup-norm {norm:e} exceeds {threshold:e}")]
    Divergence {
        time: f64,
        norm: f64,
        threshold: f64,
    },

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

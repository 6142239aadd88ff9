use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("domain error in {op}: offending value {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("singular tridiagonal system: zero pivot at index {pivot}")]
    Singular { pivot: usize },

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: u64 },

    #[error(
        "kappa estimator is degenerate: denominator {denominator:e} vanishes \
         (flat likelihood landscape, the Fisher information for kappa is ~0)"
    )]
    Degenerate { denominator: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("at iteration {iteration}: {source}")]
    AtIteration {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("training aborted at iteration {iteration}: {reason} (last good checkpoint: {checkpoint})")]
    TrainingAborted {
        iteration: u64,
        reason: String,
        checkpoint: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

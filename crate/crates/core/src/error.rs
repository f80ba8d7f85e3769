use std::path::PathBuf;

use ndarray::Array1;
use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller handed in arguments outside an operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data validation failed: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    /// Lookup failures while building label similarities.
    #[error("similarity error: {0}")]
    Similarity(String),

    /// The row QP solver hit its iteration cap. Carries the best feasible
    /// iterate and its stationarity residual.
    #[error("row QP for instance {instance} did not converge: residual {residual:e} after {iterations} iterations")]
    QpNotConverged {
        instance: usize,
        iterations: usize,
        residual: f64,
        best: Array1<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn shape(what: &str, expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        Error::Argument(format!("{what}: expected shape {expected:?}, got {got:?}"))
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

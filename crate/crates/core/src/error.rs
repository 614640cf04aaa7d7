use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed config: {0}")]
    Syntax(String),

    #[error("missing key `{0}`")]
    MissingKey(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("key `{key}`: {message}")]
    InvalidValue { key: String, message: String },

    #[error("invalid control parameters: {0}")]
    InvalidParams(String),

    #[error("scaled time s = {s} outside [0, {r}]")]
    OutOfDomain { s: f64, r: usize },

    #[error(
        "unstable time step: CFL number {cfl:.3} exceeds {limit}; \
         raise M (currently {m}) or `substeps` (currently {substeps})"
    )]
    Unstable {
        cfl: f64,
        limit: f64,
        m: usize,
        substeps: usize,
    },

    #[error("non-finite {what} at node {node}, sample {sample}")]
    NonFinite {
        what: &'static str,
        node: usize,
        sample: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("infeasible starting point: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn invalid(key: &str, message: impl Into<String>) -> Self {
        Error::InvalidValue {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// True for errors raised by the numerical kernels (instability, blow-up,
    /// inconsistent grids) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unstable { .. }
                | Error::NonFinite { .. }
                | Error::GridMismatch(_)
                | Error::OutOfDomain { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

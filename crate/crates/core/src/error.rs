use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid domain (non-positive dt, zero trials, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("series shorter than embedding window: length {len} < window {window}")]
    SeriesTooShort { len: usize, window: usize },

    #[error("non-finite value at component {component}, snapshot {snapshot}")]
    NonFinite { component: usize, snapshot: usize },

    #[error("unstable drift matrix: eigenvalue with real part {max_real_part} >= 0")]
    UnstableDrift { max_real_part: f64 },

    #[error("data has zero energy; no modes can be formed")]
    ZeroEnergy,

    #[error("modes are not W-orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("iterative eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("reference modes failed the convergence gate: similarity {similarity:.6} < {gate}")]
    ReferenceNotConverged { similarity: f64, gate: f64 },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input parameters rather than runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DimensionMismatch(_)
                | Error::SeriesTooShort { .. }
                | Error::UnstableDrift { .. }
        )
    }
}

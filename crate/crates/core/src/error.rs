use std::path::PathBuf;

use crate::admm::AdmmReport;
use crate::outer::OuterReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("msh parse error (line {line}): {message}")]
    MshParse { line: usize, message: String },

    #[error("config error (line {line}, key `{key}`): {message}")]
    Config { line: usize, key: String, message: String },

    /// The problem setup cannot produce a well-posed system.
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("ADMM did not converge in {} iterations", .0.iterations)]
    AdmmNotConverged(Box<AdmmReport>),

    #[error("outer pressure iteration did not converge in {} iterations", .0.iterations())]
    OuterNotConverged(Box<OuterReport>),

    #[error("oracle refuses {dofs} free velocity DOFs (limit {limit})")]
    OracleTooLarge { dofs: usize, limit: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {min} {what}, got {got}")]
    TooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite{context}")]
    NotPositiveDefinite { context: String },

    #[error("solver produced non-finite values at iteration {iteration}")]
    SolverDiverged { iteration: usize },

    #[error("edge sets are defined over different node sets")]
    NodeSetMismatch,

    #[error("matrix support is not symmetric at ({row}, {col})")]
    AsymmetricSupport { row: usize, col: usize },

    #[error("cannot place {requested} edges on {nodes} nodes (max {max})")]
    TooManyEdges {
        requested: usize,
        nodes: usize,
        max: usize,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("variable names of condition `{condition}` do not match the first condition")]
    HeaderMismatch { condition: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::TooSmall { .. } => "too_small",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::SolverDiverged { .. } => "solver_diverged",
            Error::NodeSetMismatch => "node_set_mismatch",
            Error::AsymmetricSupport { .. } => "asymmetric_support",
            Error::TooManyEdges { .. } => "too_many_edges",
            Error::Parse { .. } => "parse",
            Error::HeaderMismatch { .. } => "header_mismatch",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

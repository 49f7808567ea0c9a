use thiserror::Error;

/// Errors raised anywhere in the estimation and testing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("value {value} is outside [0, 1]")]
    OutOfRange { value: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not converge after {iterations} iterations (kkt residual {kkt_residual:e})")]
    NonConvergence {
        iterations: usize,
        kkt_residual: f64,
        /// Best iterate, as orbit log-masses.
        best: Vec<f64>,
    },

    #[error("solver inconsistency: {0}")]
    SolverInconsistency(String),

    #[error("degenerate covariance: zero mass on cell {cell:?}")]
    DegenerateCovariance { cell: Vec<usize> },

    #[error("rank-deficient regression: {0}")]
    RankDeficient(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

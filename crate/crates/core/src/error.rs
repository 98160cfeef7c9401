use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum NirbError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("point ({x}, {y}) is outside the source mesh")]
    PointOutsideMesh { x: f64, y: f64 },

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("normal matrix is rank deficient (condition estimate {condition:e}); pass delta > 0")]
    RankDeficient { condition: f64 },

    #[error("non-finite value {what} at {location}")]
    NonFinite { what: &'static str, location: String },

    #[error("time step {step} failed: {source}")]
    TimeStep {
        step: usize,
        #[source]
        source: Box<NirbError>,
    },

    #[error("Newton iteration diverged; residual history {history:?}")]
    NewtonDiverged { history: Vec<f64> },

    #[error("basis is not L2-orthonormal (Gram deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("rectification at time index {index}: {source}")]
    Rectification {
        index: usize,
        #[source]
        source: Box<NirbError>,
    },

    #[error("solve for parameter {param:?} failed: {source}")]
    Parameter {
        param: Vec<f64>,
        #[source]
        source: Box<NirbError>,
    },

    #[error("parameter {0:?} outside the admissible bounds")]
    OutOfBounds(Vec<f64>),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("missing artifacts at {0}; run `offline` first")]
    MissingArtifacts(String),

    #[error("corrupt artifact file: {0}")]
    Corrupt(String),

    #[error("artifacts are inconsistent with the configuration: {0}")]
    Inconsistent(String),

    #[error("unsupported artifact format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NirbError {
    /// Short machine-readable tag used by the command-line diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            NirbError::InvalidArgument(_) => "invalid_argument",
            NirbError::DimensionMismatch { .. } => "dimension_mismatch",
            NirbError::PointOutsideMesh { .. } => "point_outside_mesh",
            NirbError::NoConvergence { .. } => "no_convergence",
            NirbError::NotSymmetric(_) => "not_symmetric",
            NirbError::NotPositiveDefinite => "not_positive_definite",
            NirbError::RankDeficient { .. } => "rank_deficient",
            NirbError::NonFinite { .. } => "non_finite",
            NirbError::TimeStep { .. } => "time_step",
            NirbError::NewtonDiverged { .. } => "newton_diverged",
            NirbError::NotOrthonormal(_) => "not_orthonormal",
            NirbError::Rectification { .. } => "rectification",
            NirbError::Parameter { .. } => "parameter",
            NirbError::OutOfBounds(_) => "out_of_bounds",
            NirbError::Config { .. } => "config",
            NirbError::MissingArtifacts(_) => "missing_artifacts",
            NirbError::Corrupt(_) => "corrupt_artifacts",
            NirbError::Inconsistent(_) => "inconsistent_artifacts",
            NirbError::Version { .. } => "version_mismatch",
            NirbError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, NirbError>;

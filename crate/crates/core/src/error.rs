use thiserror::Error;

/// Errors shared across the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {value}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },

    #[error("backward called without a stored forward pass")]
    NoForwardPass,

    #[error("target mask is not binary (found value {0})")]
    NonBinaryTarget(f64),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("kept set became empty after filtering round {round}")]
    EmptyKeptSet { round: usize },

    #[error("zero-variance truth vector; r-squared undefined")]
    ZeroVariance,

    #[error("country {0} has no rows")]
    EmptyCountry(String),

    #[error("singular linear system (lambda = {lambda})")]
    SingularSystem { lambda: f64 },

    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),

    #[error("bad file format in {path}: {reason}")]
    BadFormat { path: String, reason: String },

    #[error("schema mismatch in {path}: missing or malformed column `{column}`")]
    SchemaMismatch { path: String, column: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("png error on {path}: {reason}")]
    Png { path: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

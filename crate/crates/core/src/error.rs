use thiserror::Error;

/// Errors raised by the simulator and optimizer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("layer index {index} out of range 1..={num_layers}")]
    LayerIndex { index: usize, num_layers: usize },

    #[error("source and destination points coincide")]
    ZeroDistance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("delay guard exhausted: row {row} would shift a nonzero sample past the block end")]
    GuardBudget { row: usize },

    #[error("channel inverse is unstable: largest root modulus {max_root_modulus}")]
    UnstableInverse { max_root_modulus: f64 },

    #[error("effective response is identically zero")]
    ZeroResponse,

    #[error("dominant tap is tied: |g[{first}]| and |g[{second}]| differ by less than 1e-12")]
    TiedDominantTap { first: usize, second: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

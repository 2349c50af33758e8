use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The prediction pipeline cannot keep up with execution for this chunk size.
    #[error("infeasible schedule: {0}")]
    Infeasible(String),

    #[error("action dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("expected a chunk of {expected} actions, got {actual}")]
    ChunkLength { expected: usize, actual: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("episode already finished after {episode_length} steps")]
    EpisodeEnded { episode_length: usize },

    #[error("no committed action covers step {step}")]
    EmptyEnsemble { step: usize },

    #[error("buffer cell (row {row}, col {col}) already written or out of range")]
    BufferWrite { row: usize, col: usize },

    #[error("prediction protocol violation: {0}")]
    Protocol(String),

    #[error("policy error: {0}")]
    Policy(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error("accuracy ratio undefined: quantized error is zero while float error is {e0}")]
    UndefinedRatio { e0: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {context} expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite value during {context} (batch of {batch_size})")]
    NonFinite { context: String, batch_size: usize },
    #[error("missing parameter tensor `{0}`")]
    MissingParam(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error("checkpoint io error: {0}")]
    Io(#[from] std::io::Error),
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("frames out of order: previous frame {prev} is not followed by {curr}")]
    FrameOrder { prev: usize, curr: usize },

    #[error("instance {index}: {reason}")]
    InvalidInstance { index: usize, reason: String },

    #[error("unknown action label `{0}`")]
    UnknownAction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("model kind mismatch: expected {expected}, got {actual}")]
    KindMismatch { expected: String, actual: String },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("provider: {0}")]
    Provider(String),

    #[error("generator reply is not 0 or 1: {raw:?}")]
    CharacterParse { raw: String },

    #[error("session: {0}")]
    Session(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures a caller may sensibly retry (remote provider hiccups).
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Provider(_))
    }
}

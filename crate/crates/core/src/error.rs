use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution family id {0} (expected 0..=12)")]
    InvalidFamily(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid shape {x_bins}x{y_levels} (both dimensions must be >= 2)")]
    InvalidShape { x_bins: usize, y_levels: usize },

    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("non-finite gradient in parameter block {0}")]
    NonFiniteGradient(usize),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

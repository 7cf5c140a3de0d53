//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An axis length is not divisible by the required window/patch/stride size.
    #[error("{axis} = {size} is not divisible by {divisor}")]
    Divisibility {
        axis: &'static str,
        size: usize,
        divisor: usize,
    },

    /// Shift must stay strictly below the window size.
    #[error("shift {shift} must be smaller than window size {window}")]
    InvalidShift { shift: usize, window: usize },

    /// Tensor shape does not match what an operation expects.
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    /// Bad model/train configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// Dataset ingestion problems (missing frames, bad sizes, unreadable files).
    #[error("data error: {0}")]
    Data(String),

    /// Checkpoint archive parsing or consistency failure.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training produced a non-finite loss; aborting is safer than continuing.
    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: u64, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code category used by the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::Image(_) | Error::Checkpoint(_) => 3,
            Error::NonFiniteLoss { .. } => 4,
            _ => 1,
        }
    }
}

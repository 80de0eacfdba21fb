//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/layer dimension mismatch.
    #[error("dimension mismatch: {0}")]
    Dim(String),

    /// Invalid configuration or argument value.
    #[error("invalid config: {0}")]
    Config(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at stage {stage}, epoch {epoch} (loss = {loss})")]
    Diverged { stage: usize, epoch: usize, loss: f64 },

    /// Malformed or truncated file contents.
    #[error("corrupt file: {0}")]
    Format(String),

    /// Entropy-coder decode failure.
    #[error("decode error: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

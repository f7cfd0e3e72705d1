use pebble_autodiff::AutodiffError;
use pebble_envs::EnvError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("width mismatch in {context}: expected {expected}, got {got}")]
    Width {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("length mismatch in {context}: {a} vs {b}")]
    Length {
        context: &'static str,
        a: usize,
        b: usize,
    },
    #[error("unknown instruction token {token} (vocabulary size {vocab})")]
    UnknownToken { token: usize, vocab: usize },
    #[error("instruction of length {len} exceeds maximum {max}")]
    InstructionTooLong { len: usize, max: usize },
    #[error("action index {index} out of range for {count} actions")]
    ActionIndex { index: usize, count: usize },
    #[error("no valid (time, offset) pair among the selected indices")]
    EmptyIndexSet,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("non-finite {what}")]
    NonFinite { what: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Converts into the autodiff error type, for closures handed to
    /// [`pebble_autodiff::finite_diff_check`].
    pub fn into_autodiff(self) -> AutodiffError {
        match self {
            Error::Autodiff(e) => e,
            other => AutodiffError::Invalid(other.to_string()),
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, EnvError>;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action {0} out of range (expected 0..{max})", max = crate::NUM_ACTIONS)]
    InvalidAction(usize),
    #[error("step called on a finished episode")]
    EpisodeOver,
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

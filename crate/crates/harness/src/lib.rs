//! Experiment orchestration: configuration, the training loop, evaluation,
//! normalized scores, CSV logs and checkpoints.

pub mod agent;
pub mod config;
pub mod envs;
pub mod eval;
pub mod log;
pub mod probe_report;
pub mod score;
pub mod train;

pub use agent::Agent;
pub use config::{Behaviour, ConfigError, EnvKind, ExperimentConfig, Method, SkipMode};
pub use eval::{evaluate, reference_returns, EvalPolicy};
pub use log::{read_csv, write_csv, LogRecord};
pub use score::{aggregate_normalized_score, NormalizedScoreTable, TaskScore};
pub use train::{run_training, ProbeScore, Trainer, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] pebble_core::Error),
    #[error(transparent)]
    Env(#[from] pebble_envs::EnvError),
    #[error(transparent)]
    Autodiff(#[from] pebble_autodiff::AutodiffError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("non-finite total loss after {frames} frames: {report}")]
    NonFiniteLoss { frames: u64, report: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

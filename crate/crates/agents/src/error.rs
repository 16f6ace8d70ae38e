use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Core(#[from] traji_core::CoreError),
    #[error(transparent)]
    Nn(#[from] traji_nn::NnError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint does not match the task: {0}")]
    Mismatch(String),
    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: String },
}

pub type Result<T, E = AgentError> = std::result::Result<T, E>;

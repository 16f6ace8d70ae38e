use thiserror::Error;

#[derive(Debug, Error)]
pub enum AisError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] traji_core::CoreError),
    #[error(transparent)]
    Agent(#[from] traji_agents::AgentError),
    #[error("missing column `{0}` in AIS header")]
    MissingColumn(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = AisError> = std::result::Result<T, E>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite value in {0}")]
    Numeric(&'static str),
    #[error("latitude {0}° is too close to a pole for the flat-step update")]
    PolarSingularity(f64),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

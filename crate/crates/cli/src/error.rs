use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// Missing or unusable input data.
    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] occgen::Error),

    #[error(transparent)]
    Review(#[from] occgen_review::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Review(occgen_review::Error::Mesh(e)) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

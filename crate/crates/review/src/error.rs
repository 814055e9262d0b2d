use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("survey manifest: {0}")]
    Manifest(String),

    #[error("label store {path}: line {line}: {message}")]
    Store {
        path: String,
        line: usize,
        message: String,
    },

    #[error("mesh payload: {0}")]
    Wire(String),

    #[error(transparent)]
    Mesh(#[from] occgen::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

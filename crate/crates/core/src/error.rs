use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("modality {modality} is degenerate: genuine scores have zero spread")]
    DegenerateModality { modality: usize },

    #[error("modality mismatch: expected {expected}, found {found}")]
    ModalityMismatch { expected: usize, found: usize },

    #[error("gain is undefined when the reference error rate is zero")]
    UndefinedGain,

    #[error("s-expression parse error at token `{token}`: {msg}")]
    Sexpr { token: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

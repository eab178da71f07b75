use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("group `{0}` was not seen at training time")]
    UnseenGroup(String),

    #[error("group `{0}` has no positive examples")]
    NoPositives(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("model is not resumable: {0}")]
    NotResumable(String),

    #[error("all grid configurations failed: {}", .0.join("; "))]
    GridFailed(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad input or configuration rather than a
    /// failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Validation(_)
                | Error::Row { .. }
                | Error::InvalidArgument(_)
                | Error::UnknownAxis(_)
                | Error::UnknownGroup(_)
                | Error::Config(_)
        )
    }
}

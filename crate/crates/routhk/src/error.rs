use crate::expr::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("unknown example `{0}`; run `routhk list-examples`")]
    UnknownExample(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid system descriptor: {0}")]
    Descriptor(String),

    #[error(transparent)]
    Expression(#[from] ParseError),

    #[error(transparent)]
    Core(#[from] routhk_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl AppError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input or a failed G-regularity solve, 3 for I/O, 4 for
    /// inconsistent momentum constraints.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io { .. } => 3,
            AppError::Core(routhk_core::Error::InconsistentConstraints { .. }) => 4,
            _ => 2,
        }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Descriptor(e.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;

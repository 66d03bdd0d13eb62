use thiserror::Error;

#[derive(Debug, Error)]
pub enum SofosError {
    #[error(transparent)]
    Core(#[from] sofos_core::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("verification failed for query {query} answered from {view}: {detail}")]
    Verification {
        query: String,
        view: String,
        detail: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl SofosError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SofosError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = SofosError> = std::result::Result<T, E>;

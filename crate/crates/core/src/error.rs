use alloc::string::String;

/// Errors raised by the core engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid term: {0}")]
    InvalidTerm(String),

    #[error("invalid triple: {0}")]
    InvalidTriple(String),

    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("invalid query: {0}")]
    Semantic(String),

    #[error("planning error: {0}")]
    Planning(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("facet mismatch: {0}")]
    FacetMismatch(String),

    #[error("unknown view `{0}`")]
    UnknownView(String),

    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    #[error("model not trained")]
    Untrained,

    #[error("training failed: {0}")]
    Training(String),

    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

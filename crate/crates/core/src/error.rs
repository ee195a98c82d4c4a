use thiserror::Error;

/// Errors raised by the tokenization pipeline.
///
/// Variant names double as the error names surfaced to external callers
/// (see [`Error::name`]).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("reference is not monophonic: {0}")]
    Monophony(String),

    #[error("invalid reference: {0}")]
    InvalidReference(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("grammar error at token {offset}: {message}")]
    Grammar { offset: usize, message: String },

    #[error("codec error: {0}")]
    Codec(String),

    #[error("config mismatch: expected fingerprint {expected}, found {found}")]
    ConfigMismatch { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Stable error name, e.g. `ParseError`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::Range(_) => "RangeError",
            Error::EmptyInput(_) => "EmptyInputError",
            Error::Monophony(_) => "MonophonyError",
            Error::InvalidReference(_) => "InvalidReferenceError",
            Error::Grid(_) => "GridError",
            Error::Grammar { .. } => "GrammarError",
            Error::Codec(_) => "CodecError",
            Error::ConfigMismatch { .. } => "ConfigMismatchError",
            Error::Config(_) => "ConfigError",
            Error::Internal(_) => "InternalError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

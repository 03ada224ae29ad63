use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Tensor shapes do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The operation was invoked in an inconsistent way.
    #[error("usage error: {0}")]
    Usage(String),

    /// A configuration value failed validation.
    #[error("invalid config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A file violates its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// Training dynamics stopped converging.
    #[error("divergence detected: {0}")]
    Divergence(String),

    /// A function returned NaN or infinity.
    #[error("non-finite evaluation at coordinate {coordinate}: {msg}")]
    NonFinite { coordinate: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn domain_err(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

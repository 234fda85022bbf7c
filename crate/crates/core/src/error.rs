use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent network spec, bad hyperparameters, invalid config.
    #[error("configuration error: {0}")]
    Config(String),

    /// Shapes, lengths or value ranges that violate an operation's contract.
    #[error("input error: {0}")]
    Input(String),

    #[error("numerical error{}: {message}", layer.map(|l| format!(" in layer {l}")).unwrap_or_default())]
    Numerical { layer: Option<usize>, message: String },

    /// Malformed binary or text file; `offset` is the byte (or line) position.
    #[error("format error at offset {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Dataset contents unusable for the requested operation.
    #[error("data error: {0}")]
    Data(String),

    #[error("adaptation error: {0}")]
    Adaptation(String),

    /// An internal identity that must hold up to rounding did not.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// A metric whose formula has a zero denominator for these inputs.
    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn numerical(layer: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Numerical { layer, message: msg.into() }
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { offset, message: msg.into() }
    }
}

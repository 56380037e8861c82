use thiserror::Error;

/// Errors raised by space construction, the numerical routines and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violation in `{field}`: {reason}")]
    InvariantViolation { field: &'static str, reason: String },

    #[error("space is disconnected: {} components {:?}", .components.len(), component_sizes(.components))]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("cap exceeded for {what}: {detail}; {hint}")]
    CapExceeded {
        what: &'static str,
        detail: String,
        hint: &'static str,
    },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn component_sizes(components: &[Vec<usize>]) -> Vec<usize> {
    components.iter().map(Vec::len).collect()
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

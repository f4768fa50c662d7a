use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input text. `line` is 1-based; 0 means "no line".
    #[error("{}", if *line == 0 { msg.clone() } else { format!("line {line}: {msg}") })]
    Parse { line: usize, msg: String },

    /// Input that parses but violates a model or parameter invariant.
    #[error("invalid: {0}")]
    Validation(String),

    #[error("{what} too large for exact enumeration: {size} exceeds cap {cap}")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("evidence has zero probability")]
    ZeroEvidence,

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

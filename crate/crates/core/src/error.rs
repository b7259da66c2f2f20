use std::fmt;
use std::io;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by loaders, validators, and the numeric pipeline.
#[derive(Debug)]
pub enum Error {
    /// A text source failed to parse; carries the 1-based line number.
    Parse { line: usize, message: String },
    /// A parameter violated an operation's precondition.
    InvalidArgument(String),
    /// A node id that is not part of the graph.
    UnknownNode(u64),
    /// Walk counts left the exactly-representable integer range of f64.
    Overflow(String),
    Io(io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for errors caused by bad caller-supplied parameters rather than
    /// bad data; the CLI maps these to usage-error exit status.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::UnknownNode(id) => write!(f, "unknown node id {id}"),
            Error::Overflow(msg) => write!(f, "count overflow: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

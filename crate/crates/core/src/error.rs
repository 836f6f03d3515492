use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },

    #[error("cannot take the union of an empty list")]
    EmptyUnion,

    #[error("cannot choose {k} active bits out of {dimension}")]
    TooManyActive { k: usize, dimension: usize },

    #[error("operation requires a module in {expected} mode")]
    ModeMismatch { expected: &'static str },

    #[error("position {position} outside the {side}x{side} grid")]
    InvalidPosition { position: usize, side: usize },

    #[error("invalid traversal order: {0}")]
    InvalidOrder(String),

    #[error("location representation is empty")]
    EmptyLocation,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A structured feature-file parse failure.
///
/// `record` is the zero-based example index (`None` for header problems) and
/// `offset` the byte (binary files) or line (JSON-lines files) where the
/// problem was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct FormatError {
    pub record: Option<usize>,
    pub offset: u64,
    pub kind: FormatErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatErrorKind {
    BadMagic,
    UnsupportedVersion(u16),
    HeaderMismatch(&'static str),
    Truncated,
    IndexOutOfRange(u32),
    Unsorted,
    Duplicate(u32),
    WrongCount { expected: usize, found: usize },
    Syntax(String),
}

impl fmt::Display for FormatErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadMagic => write!(f, "bad magic"),
            Self::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            Self::HeaderMismatch(field) => write!(f, "unsupported header value for {field}"),
            Self::Truncated => write!(f, "truncated record"),
            Self::IndexOutOfRange(i) => write!(f, "index out of range ({i})"),
            Self::Unsorted => write!(f, "indices not in ascending order"),
            Self::Duplicate(i) => write!(f, "duplicate index {i}"),
            Self::WrongCount { expected, found } => {
                write!(f, "expected {expected} entries, found {found}")
            }
            Self::Syntax(msg) => write!(f, "{msg}"),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.record {
            Some(r) => write!(f, "record {r} at offset {}: {}", self.offset, self.kind),
            None => write!(f, "header at offset {}: {}", self.offset, self.kind),
        }
    }
}

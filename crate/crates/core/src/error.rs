use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// What went wrong while decoding one of the binary or text containers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatErrorKind {
    BadMagic,
    VersionUnsupported,
    TruncatedFile,
    SizeMismatch,
    BadLabelByte,
    TrailingBytes,
    InvalidHeader,
    NonFiniteValue,
    InvalidActivity,
    BadJsonLine,
}

impl FormatErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            FormatErrorKind::BadMagic => "BadMagic",
            FormatErrorKind::VersionUnsupported => "VersionUnsupported",
            FormatErrorKind::TruncatedFile => "TruncatedFile",
            FormatErrorKind::SizeMismatch => "SizeMismatch",
            FormatErrorKind::BadLabelByte => "BadLabelByte",
            FormatErrorKind::TrailingBytes => "TrailingBytes",
            FormatErrorKind::InvalidHeader => "InvalidHeader",
            FormatErrorKind::NonFiniteValue => "NonFiniteValue",
            FormatErrorKind::InvalidActivity => "InvalidActivity",
            FormatErrorKind::BadJsonLine => "BadJsonLine",
        }
    }
}

/// A decoding failure pinned to a byte offset of the input.
///
/// For JSONL input the offset is the byte position of the start of the
/// offending line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    pub kind: FormatErrorKind,
    pub offset: u64,
    pub detail: String,
}

impl FormatError {
    pub fn new(kind: FormatErrorKind, offset: u64, detail: impl Into<String>) -> Self {
        FormatError {
            kind,
            offset,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at offset {}: {}",
            self.kind.code(),
            self.offset,
            self.detail
        )
    }
}

impl std::error::Error for FormatError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero-norm vector where a direction is required")]
    ZeroVector,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("segment has no frames")]
    EmptySegment,

    #[error("no frame reached the selection threshold {threshold}")]
    NoKeyframe { threshold: f64 },

    #[error("{0}")]
    WrongRule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("confusion matrix has no counts")]
    EmptyMatrix,

    #[error("average precision undefined: no positive items")]
    NoPositives,

    #[error("unknown enrollment tag `{0}`")]
    UnknownTag(String),

    #[error("segment {segment_id} carries no ground-truth labels")]
    NoGroundTruth { segment_id: u32 },

    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code, printed by the CLI before the message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ZeroVector => "ZeroVector",
            Error::NonFinite(_) => "NonFinite",
            Error::EmptySegment => "EmptySegment",
            Error::NoKeyframe { .. } => "NoKeyframe",
            Error::WrongRule(_) => "WrongRule",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::NoPositives => "NoPositives",
            Error::UnknownTag(_) => "UnknownTag",
            Error::NoGroundTruth { .. } => "NoGroundTruth",
            Error::Format { source, .. } => source.kind.code(),
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}

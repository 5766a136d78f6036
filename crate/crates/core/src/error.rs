use std::path::PathBuf;

/// Errors raised anywhere in the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("input too short for {op}: length {len} < window {window}")]
    InputTooShort {
        op: &'static str,
        len: usize,
        window: usize,
    },
    #[error("max pooling over an empty time axis")]
    EmptyTimeAxis,
    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(f64),
    #[error("backward already ran on this computation record")]
    DoubleBackward,
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("unknown label '{label}', schema classes are {classes:?}")]
    UnknownLabel { label: String, classes: Vec<String> },
    #[error("entity spans overlap: {first:?} and {second:?}")]
    OverlappingSpans {
        first: (usize, usize),
        second: (usize, usize),
    },
    #[error("entity span {span:?} invalid for sentence of {len} tokens")]
    BadSpan { span: (usize, usize), len: usize },
    #[error("invalid relation instance '{id}': {msg}")]
    InvalidInstance { id: String, msg: String },
    #[error("embedding dimension mismatch: file has {file}, configured {configured}")]
    EmbeddingDim { file: usize, configured: usize },
    #[error("split needs {requested} instances but the corpus has {available}")]
    SplitTooLarge { requested: usize, available: usize },
    #[error("instance '{0}' has no label")]
    MissingLabel(String),
    #[error("non-finite {term} loss")]
    NonFinite { term: &'static str },
    #[error("label schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("parameter '{name}' shape mismatch: expected {expected:?}, found {found:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

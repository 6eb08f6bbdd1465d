use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {op} got {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid geometry for {op}: {detail}")]
    Geometry { op: &'static str, detail: String },

    #[error("{op} of an empty tensor")]
    EmptyTensor { op: &'static str },

    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("non-finite {term} (epoch {epoch}, step {step})")]
    NonFinite {
        term: String,
        epoch: usize,
        step: usize,
    },

    #[error("undefined correlation: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("degenerate signal: all samples are zero")]
    DegenerateSignal,

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        expected: &'static str,
    },

    #[error("unsupported version {found} in {path}")]
    BadVersion { path: PathBuf, found: u32 },

    #[error("truncated file {path}: header implies {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 usage, 3 data/format, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownKey(_) => 2,
            Error::BadMagic { .. }
            | Error::BadVersion { .. }
            | Error::Truncated { .. }
            | Error::Malformed { .. }
            | Error::Io { .. }
            | Error::ShapeMismatch { .. }
            | Error::Geometry { .. } => 3,
            Error::EmptyTensor { .. }
            | Error::NonScalarRoot(_)
            | Error::NonFinite { .. }
            | Error::UndefinedCorrelation(_)
            | Error::NotPowerOfTwo(_)
            | Error::DegenerateSignal => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

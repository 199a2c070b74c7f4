use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed audio file: {0}")]
    Format(String),

    #[error("unsupported audio encoding: {0}")]
    Unsupported(String),

    #[error("audio file contains no samples")]
    EmptyAudio,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("value outside the function domain: {0}")]
    Domain(String),

    #[error("degenerate mel filter {index}: {message}")]
    FilterConstruction { index: usize, message: String },

    #[error("training failed: {0}")]
    Training(String),

    #[error("non-finite value in row {row}")]
    Data { row: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("no voiced periodicity found (best normalized autocorrelation {best:.3})")]
    Unvoiced { best: f64 },

    #[error("model file error: {0}")]
    Model(String),

    #[error("experiment failed for method {method}, effect {effect}, utterance {utterance}: {source}")]
    Stage {
        method: String,
        effect: String,
        utterance: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}

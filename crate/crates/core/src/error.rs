use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record {record}: {message}")]
    Malformed { record: usize, message: String },

    #[error("non-monotonic timestamp at record {record}")]
    NonMonotonic { record: usize },

    #[error("unknown test_id {0}")]
    UnknownTest(i64),

    #[error("header: {0}")]
    Header(String),

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("region: {0}")]
    Region(String),

    #[error("wrong test: expected test {expected}, got test {actual}")]
    WrongTest { expected: u8, actual: u8 },

    #[error("group {0} has fewer than {1} subjects")]
    TooFewSubjects(String, usize),

    #[error("cannot oversample singleton class")]
    SingletonClass,

    #[error("no feature passes the FDR threshold {0}; lower the threshold")]
    EmptySelection(f64),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config: {0}")]
    Config(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("stage `{stage}`: {message}")]
    Stage { stage: &'static str, message: String },

    #[error("config hash mismatch: {0}")]
    HashMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad user input rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::Config(_)
                | Error::UnknownFormat(_)
                | Error::Io { .. }
                | Error::HashMismatch(_)
        )
    }
}

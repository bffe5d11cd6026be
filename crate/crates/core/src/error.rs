use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {details}")]
    Shape { op: &'static str, details: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error in {path} (line {line}, column {column}): {msg}")]
    Parse {
        path: String,
        line: usize,
        column: String,
        msg: String,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("ground-truth potential outcomes unavailable: {0}")]
    MissingGroundTruth(String),

    #[error("single treatment group: {0}")]
    SingleGroup(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Training { epoch: usize, msg: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("missing results: {0}")]
    MissingResults(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(op: &'static str, details: impl Into<String>) -> Self {
        Error::Shape {
            op,
            details: details.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (configs, files, flags)
    /// rather than a failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::Usage(_)
                | Error::Split(_)
                | Error::MissingResults(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("circular mean is undefined: resultant length {0:.3e} is below 1e-9")]
    UndefinedMean(f64),

    #[error("metric is undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("stream order violated: timestamp {got} does not follow {last}")]
    StreamOrder { last: f64, got: f64 },

    #[error("internal state error: {0}")]
    InternalState(String),

    #[error("streams are not frame-aligned: {0}")]
    Alignment(String),

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 1 is reserved for usage errors, which are raised by the argument parser
    /// before any library code runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InternalState(_) => 3,
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}

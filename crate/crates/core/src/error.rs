use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("common average reference needs at least 2 channels, got {0}")]
    TooFewChannels(usize),

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("{what} at {freq_hz:.3} Hz reaches the Nyquist limit {nyquist_hz:.3} Hz")]
    AboveNyquist {
        what: String,
        freq_hz: f64,
        nyquist_hz: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("stream too short: expected at least {expected} samples, got {actual}")]
    StreamTooShort { expected: usize, actual: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("trial file error at {location}: {message}")]
    TrialFormat { location: String, message: String },

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("codebook capacity exceeded: {users} users but only {capacity} patterns")]
    CapacityExceeded { users: usize, capacity: u128 },

    #[error("user {0} is not in the identification report")]
    NotIdentified(usize),

    #[error("degenerate LOS estimate for user {0} (zero amplitude)")]
    DegenerateEstimate(usize),

    #[error("ill-conditioned MMSE system (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Malformed(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

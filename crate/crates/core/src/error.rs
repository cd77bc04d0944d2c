use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("filter blow-up at t = {t}: {reason}")]
    FilterBlowup { t: f64, reason: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn blowup(t: f64, reason: impl Into<String>) -> Self {
        Error::FilterBlowup {
            t,
            reason: reason.into(),
        }
    }

    /// Process exit code for the error class: configuration 2, numerical 3,
    /// filter blow-up 4, anything else 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Numerical(_) | Error::Domain(_) => 3,
            Error::FilterBlowup { .. } => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}

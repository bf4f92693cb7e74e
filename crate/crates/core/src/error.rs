use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("adiabatic elimination undefined: single-photon detuning is zero")]
    EliminationUndefined,

    #[error("mixing angle undefined: collective Rabi frequency and detuning are both zero")]
    UndefinedAngle,

    #[error("time {t} µs outside schedule support [0, {duration}] µs")]
    OutOfRange { t: f64, duration: f64 },

    #[error("full-ensemble model limited to {max} atoms, got {n}")]
    SizeLimit { n: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(#[from] NumericFailure),

    #[error("monte-carlo trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: NumericFailure,
    },

    #[error("sweep point {index} failed: {source}")]
    SweepPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

/// Integration quality violations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericFailure {
    #[error("norm drift {drift:.3e} exceeds tolerance {tolerance:.3e} at t = {t} µs")]
    NormDrift { drift: f64, tolerance: f64, t: f64 },

    #[error("trace drift {drift:.3e} exceeds tolerance {tolerance:.3e} at t = {t} µs")]
    TraceDrift { drift: f64, tolerance: f64, t: f64 },

    #[error("density matrix positivity violated: smallest eigenvalue {min_eigenvalue:.3e} at t = {t} µs")]
    Positivity { min_eigenvalue: f64, t: f64 },

    #[error("non-finite state at t = {t} µs")]
    NonFinite { t: f64 },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True when the root cause is an integration quality violation.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Trial { .. } => true,
            Error::SweepPoint { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

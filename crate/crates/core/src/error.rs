use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the simulator reports.
///
/// The variants map one-to-one onto the command-line exit codes, see
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("pulse {index}: {message}")]
    Schedule { index: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis dimension {dimension} exceeds the configured cap of {cap} states")]
    Capacity { dimension: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("time {t} ns is outside the program interval [{start}, {end}] ns")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("numerical abort at t = {t} ns: {message}")]
    NumericalAbort { t: f64, message: String },

    #[error("calibration of transition {from}<->{to} failed: {message}")]
    Calibration {
        from: usize,
        to: usize,
        message: String,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    /// Process exit status used by `esrsim`.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Parse { .. } => 4,
            Error::Validation(_)
            | Error::Schedule { .. }
            | Error::InvalidArgument(_)
            | Error::Capacity { .. }
            | Error::DimensionMismatch { .. }
            | Error::OutOfRange { .. } => 5,
            Error::Integrity(_) | Error::NumericalAbort { .. } => 6,
            Error::Calibration { .. } => 7,
        }
    }
}

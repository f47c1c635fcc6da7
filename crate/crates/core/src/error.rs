use thiserror::Error;

/// Errors raised across the learning stack, the session service and the
/// analysis tools.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("underdetermined fit: {timesteps} timesteps for {basis} basis functions")]
    Underdetermined { timesteps: usize, basis: usize },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty sample history")]
    EmptyHistory,

    #[error("empty group")]
    EmptyGroup,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("correlation undefined for a constant vector")]
    UndefinedCorrelation,

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("no fallback movement has been saved")]
    NoFallback,

    #[error("operation not available in this mode: {0}")]
    Capability(String),

    #[error("operation not allowed in phase {phase}: {op}")]
    WrongPhase { phase: String, op: String },

    #[error("duplicate session id {0}")]
    DuplicateSession(String),

    #[error("unknown session id {0}")]
    UnknownSession(String),

    #[error("malformed log: {0}")]
    MalformedLog(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code used on the wire and across the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Underdetermined { .. } => "underdetermined",
            Error::InvalidTrajectory(_) => "invalid_trajectory",
            Error::Config(_) => "config",
            Error::EmptyHistory => "empty_history",
            Error::EmptyGroup => "empty_group",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::UndefinedCorrelation => "undefined_correlation",
            Error::Validation(_) => "validation",
            Error::NoFallback => "no_fallback",
            Error::Capability(_) => "capability",
            Error::WrongPhase { .. } => "wrong_phase",
            Error::DuplicateSession(_) => "duplicate_session",
            Error::UnknownSession(_) => "unknown_session",
            Error::MalformedLog(_) => "malformed_log",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

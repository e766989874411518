use thiserror::Error;

/// Errors raised by the transport-process toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input (empty collections, duplicate times, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two grid-valued objects do not share a grid size.
    #[error("incompatible grids: {0} vs {1} points")]
    IncompatibleGrid(usize, usize),

    /// A scalar parameter is out of range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Too few observations inside a kernel window.
    #[error("insufficient data in window [{lo:.4}, {hi:.4}]: {found} support point(s), need {needed}")]
    InsufficientData {
        lo: f64,
        hi: f64,
        found: usize,
        needed: usize,
    },

    /// Local-linear moment determinant vanished.
    #[error("degenerate smoothing window at t = {t:.4} (sigma0^2 = {sigma0_sq:e})")]
    DegenerateWindow { t: f64, sigma0_sq: f64 },

    /// Covariance smoother could not produce an estimate at a grid point.
    #[error("covariance not estimable at ({s:.4}, {t:.4}) even with bandwidth {h:.4}")]
    NotEstimable { s: f64, t: f64, h: f64 },

    /// Baseline transport has zero norm and cannot be rescaled.
    #[error("degenerate baseline: transport equals the identity")]
    DegenerateBaseline,

    /// A covariance system stayed singular after regularization.
    #[error("ill-conditioned covariance system: {0}")]
    Conditioning(String),

    /// Unknown subject identifier.
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),

    /// Malformed or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Data file failed validation; `row` is the 1-based data row (header excluded).
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// Monte Carlo study exceeded the tolerated failure fraction.
    #[error("study failed: {failures} of {reps} replications failed (last error: {last})")]
    StudyFailed {
        failures: usize,
        reps: usize,
        last: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad error classes, used by the command line to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::UnknownSubject(_) => {
                ErrorClass::Usage
            }
            Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::IncompatibleGrid(..)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::InsufficientData { .. }
            | Error::DegenerateWindow { .. }
            | Error::NotEstimable { .. }
            | Error::DegenerateBaseline
            | Error::Conditioning(_)
            | Error::StudyFailed { .. } => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by state construction, channel application, evolution,
/// parsing and the experiment harness.
#[derive(Debug, Error)]
pub enum QpufError {
    /// Matrix or register dimensions do not match the operation's contract.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A density matrix failed validation (hermiticity, unit trace or
    /// positive semidefiniteness).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A set of Kraus operators is not trace preserving within tolerance.
    #[error("channel is not CPTP: {0}")]
    NotCptp(String),

    /// A numeric argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A challenge string is malformed for the target register.
    #[error("invalid challenge: {0}")]
    InvalidChallenge(String),

    /// The requested register size exceeds a hard simulator guard.
    #[error("register too large: {requested} qubits (limit {limit})")]
    TooManyQubits { requested: usize, limit: usize },

    /// A trajectory step was too coarse: the per-step jump probability
    /// exceeded 0.1, so first-order no-jump statistics are unreliable.
    #[error("trajectory step too coarse: per-step jump probability {prob:.4} exceeds 0.1")]
    StepTooCoarse { prob: f64 },

    /// Circuit text could not be parsed.
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A circuit cannot be routed onto the requested topology.
    #[error("routing failed: {0}")]
    Routing(String),

    /// An I/O failure while reading or writing harness artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A JSON (de)serialization failure in the harness.
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, QpufError>;

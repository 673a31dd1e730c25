use std::fmt;

use thiserror::Error;

/// Which side of the separable profile a value belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Receive side, the `N` diagonal entries of `D`.
    Receive,
    /// Transmit side, the `n` diagonal entries of `D̃`.
    Transmit,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Receive => f.write_str("receive (d)"),
            Side::Transmit => f.write_str("transmit (d_tilde)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative variance entry on {side} side at index {index}: {value}")]
    RejectNegativeEntry {
        side: Side,
        index: usize,
        value: f64,
    },

    #[error("normalized trace of the {side} profile is zero")]
    RejectZeroTrace { side: Side },

    #[error("{side} entry {value} at index {index} exceeds the declared bound {bound}")]
    RejectExceedsBound {
        side: Side,
        index: usize,
        value: f64,
        bound: f64,
    },

    #[error("non-finite value on {side} side at index {index}")]
    RejectNonFinite { side: Side, index: usize },

    #[error("profile shape mismatch: {0}")]
    RejectShape(String),

    #[error("unknown profile kind `{0}` (expected constant, linear-ramp or exponential-decay)")]
    UnknownKind(String),

    #[error("invalid profile parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed-point solver did not converge at t = {t} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        t: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("solve_path failed at grid index {index}: {source}")]
    PathFailure {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("a-priori bound violated: {0}")]
    BoundViolation(String),

    #[error("numerical failure in trial {trial}: {reason}")]
    NumericalFailure { trial: u64, reason: String },

    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used by front ends to choose exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: rejected profile, bad parameters or arguments.
    Input,
    /// The numerics failed on valid input.
    Numerical,
    /// Reading or writing files failed.
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::RejectNegativeEntry { .. }
            | Error::RejectZeroTrace { .. }
            | Error::RejectExceedsBound { .. }
            | Error::RejectNonFinite { .. }
            | Error::RejectShape(_)
            | Error::UnknownKind(_)
            | Error::InvalidParams(_)
            | Error::InvalidArgument(_)
            | Error::Json(_) => ErrorClass::Input,
            Error::NoConvergence { .. }
            | Error::BoundViolation(_)
            | Error::NumericalFailure { .. }
            | Error::InsufficientSamples { .. } => ErrorClass::Numerical,
            Error::PathFailure { source, .. } => source.class(),
            Error::Io(_) => ErrorClass::Io,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RejectNegativeEntry { .. } => "reject_negative_entry",
            Error::RejectZeroTrace { .. } => "reject_zero_trace",
            Error::RejectExceedsBound { .. } => "reject_exceeds_bound",
            Error::RejectNonFinite { .. } => "reject_non_finite",
            Error::RejectShape(_) => "reject_shape",
            Error::UnknownKind(_) => "unknown_kind",
            Error::InvalidParams(_) => "invalid_params",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NoConvergence { .. } => "no_convergence",
            Error::PathFailure { .. } => "path_failure",
            Error::BoundViolation(_) => "bound_violation",
            Error::NumericalFailure { .. } => "numerical_failure",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

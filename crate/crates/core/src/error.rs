use thiserror::Error;

/// Errors produced by the analysis, generation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pole: unsaturated transmitter {index} has p = {value}")]
    Pole { index: usize, value: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations ({reason})")]
    NoConvergence { iterations: usize, reason: String },

    #[error("no consistent attracting steady state found")]
    NoSteadyStateFound,

    #[error("no all-unsaturated steady-state point exists for these parameters")]
    NoUnsaturatedPoint,

    #[error("region is empty")]
    EmptyRegion,

    #[error("no feasible point found (best constraint violation {best_violation:e})")]
    NoFeasiblePoint { best_violation: f64 },

    #[error("point process produced no points")]
    EmptyTopology,

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

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

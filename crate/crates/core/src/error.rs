use thiserror::Error;

/// Errors raised by the solvers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KppError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} = {value} outside admissible range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("stability violation at t = {time}: node value {value} left [0, 1] (reduce dt)")]
    Stability { time: f64, value: f64 },

    #[error("bisection bracket invalid: {0}")]
    Bracket(String),

    #[error("horizon too long: {0}")]
    HorizonTooLong(String),

    #[error("node budget exceeded: {nodes} nodes > budget {budget}; {advisory}")]
    Budget {
        nodes: usize,
        budget: usize,
        advisory: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("run is tainted at t = {time}: right-boundary value {value:e} exceeded threshold; {advisory}")]
    TaintedRun { time: f64, value: f64, advisory: String },

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("data error in series '{series}': {reason}")]
    Data { series: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for KppError {
    fn from(e: std::io::Error) -> Self {
        KppError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KppError>;

pub(crate) fn out_of_range(what: &'static str, value: f64, range: impl Into<String>) -> KppError {
    KppError::OutOfRange {
        what,
        value,
        range: range.into(),
    }
}

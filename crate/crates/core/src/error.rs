use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvdeError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("time arguments out of order: s = {s} exceeds t = {t}")]
    TimeOrder { t: f64, s: f64 },

    #[error("time {t} lies outside the kernel horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("grid mismatch between path and time grid")]
    GridMismatch,

    #[error("coefficient field for exponent {exponent} has no spatial gradient")]
    MissingGradient { exponent: u32 },

    #[error("Picard iteration did not converge after {iterations} iterations (last sup change {last_change:e})")]
    PicardNotConverged { iterations: usize, last_change: f64 },

    #[error("non-finite value at grid node {index}")]
    NonFinite { index: usize },

    #[error("{0}")]
    Insufficient(String),
}

pub type Result<T> = std::result::Result<T, SvdeError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SvdeError {
    SvdeError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

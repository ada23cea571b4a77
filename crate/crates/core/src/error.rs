use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("remaining time must be finite and nonnegative, got {0}")]
    NegativeTau(f64),

    #[error("tau = {tau} lies outside the tabulated grid [{lo}, {hi}]")]
    OutsideGrid { tau: f64, lo: f64, hi: f64 },

    #[error("risky second arm has no positive stopping time")]
    NoStoppingTime,

    #[error("tabulated values are not flat at the tail (last difference {0:e})")]
    TailNotFlat(f64),

    #[error("target belief {target} exceeds starting belief {start}")]
    BeliefAboveStart { target: f64, start: f64 },

    #[error("no root found below the search ceiling {ceiling}")]
    NoRoot { ceiling: f64 },

    #[error("quadrature did not converge (estimated error {estimate:e}, tolerance {tol:e})")]
    Quadrature { estimate: f64, tol: f64 },

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("fixed-point bracket not found: g(lo = {lo}) = {g_lo}, g(hi = {hi}) = {g_hi}")]
    Bracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("grid too coarse: dt = {dt} exceeds the cap {cap}")]
    GridTooCoarse { dt: f64, cap: f64 },

    #[error("state space of {states} cells exceeds the guard {limit}")]
    StateGuard { states: u128, limit: u128 },

    #[error("schedule does not fit the horizon: {0}")]
    ScheduleMismatch(String),

    #[error("replication count must be at least 1")]
    ZeroReps,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam { name, reason: reason.into() }
    }
}

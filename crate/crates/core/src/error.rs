use thiserror::Error;

use crate::optimize::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kink convention {value}: must lie in [{lo}, {hi}]")]
    InvalidConvention { value: f64, lo: f64, hi: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate subspace: w and v are parallel")]
    DegenerateSubspace,

    #[error("unsupported distribution: {0}")]
    UnsupportedDistribution(String),

    #[error("angle undefined at w = 0")]
    UndefinedAngle,

    #[error("closed form unavailable for {0}")]
    UnsupportedClosedForm(String),

    #[error("unknown {kind} key `{key}`")]
    UnknownKey { kind: &'static str, key: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("integration failed at t = {time}: step size underflow ({step:e})")]
    IntegrationFailure {
        time: f64,
        step: f64,
        partial: Box<Trajectory>,
    },
}

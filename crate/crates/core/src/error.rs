use thiserror::Error;

/// Errors raised by the bound engines, the learners, and the simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical procedure did not converge: {0}")]
    NonConvergent(String),

    #[error("fixed point iteration hit the cap; last residual {residual:e}")]
    NoConvergence { residual: f64 },

    #[error("unstable system: long-run service rate {service} is below arrival rate {arrival}")]
    UnstableSystem { arrival: f64, service: f64 },

    #[error("unstable queue: utilization {rho} >= 1")]
    UnstableQueue { rho: f64 },

    #[error("invalid regime: q = {q} must lie in [0, 1)")]
    InvalidRegime { q: f64 },

    #[error("unstable mmWave regime: pa(theta) * qhat(-theta) = {value} >= 1")]
    UnstableRegime { value: f64 },

    #[error("no theta on the search grid satisfies the stability constraint")]
    EmptyStabilityRegion,

    #[error("arrival processes use different theta values ({0} vs {1})")]
    MismatchedTheta(f64, f64),

    #[error("CDF is not monotone at grid point {0}")]
    InvalidCdf(f64),

    #[error("argument {0} outside the open unit interval")]
    DomainError(f64),

    #[error("ccdf never drops to {p} on the grid (ccdf(x_max) = {at_max})")]
    NotReached { p: f64, at_max: f64 },

    #[error("training diverged: loss became {0}")]
    Diverged(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for this error: 2 config, 3 instability or
    /// regime, 4 validation, 5 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_) | Error::MismatchedTheta(..) => 2,
            Error::UnstableSystem { .. }
            | Error::UnstableQueue { .. }
            | Error::InvalidRegime { .. }
            | Error::UnstableRegime { .. }
            | Error::EmptyStabilityRegion => 3,
            Error::Validation(_) => 4,
            Error::Io(_) => 5,
            _ => 1,
        }
    }

    /// Stable identifier used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonConvergent(_) => "non_convergent",
            Error::NoConvergence { .. } => "no_convergence",
            Error::UnstableSystem { .. } => "unstable_system",
            Error::UnstableQueue { .. } => "unstable_queue",
            Error::InvalidRegime { .. } => "invalid_regime",
            Error::UnstableRegime { .. } => "unstable_regime",
            Error::EmptyStabilityRegion => "empty_stability_region",
            Error::MismatchedTheta(..) => "mismatched_theta",
            Error::InvalidCdf(_) => "invalid_cdf",
            Error::DomainError(_) => "domain_error",
            Error::NotReached { .. } => "not_reached",
            Error::Diverged(_) => "diverged",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step limit of {steps} exceeded at t = {t}")]
    StepLimitExceeded { t: f64, steps: usize },

    /// The integrated state overflowed or became NaN, or the step size
    /// collapsed while trying to avoid it.
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("flux did not converge by r = {r_max:e} (last change {last_change:e})")]
    NoConvergence { r_max: f64, last_change: f64 },

    #[error("profile level alpha = {alpha} differs from N + 2 = {expected}")]
    LevelMismatch { alpha: f64, expected: f64 },

    #[error("quadrature tail error still {residual:e} at r = {r_max:e}")]
    TailNotNegligible { r_max: f64, residual: f64 },

    #[error("no largest zero: {0}")]
    NoLargestZero(String),

    #[error("profile parameters do not match: {0}")]
    ParamMismatch(String),

    #[error("lost bisection bracket for critical point near a = {a}")]
    UnresolvedCritical { a: f64 },

    #[error("alpha = {alpha} coincides with a critical value")]
    OnCriticalValue { alpha: f64 },

    #[error("alpha = {alpha} coincides with 2N")]
    OnTwoN { alpha: f64 },

    #[error("no sign change found: {0}")]
    NoSignChange(String),

    #[error("no crossing of alpha'(a*_N) found near N_{k} = {n_k}")]
    CrossingNotFound { k: u32, n_k: f64 },

    #[error("no nontrivial root near the seed of branch k = {k}")]
    SeedFailure { k: u32 },

    #[error("zero count jumped from {expected} to {found} at (N, a) = ({n}, {a})")]
    ZeroCountJump {
        expected: usize,
        found: usize,
        n: f64,
        a: f64,
    },

    #[error(
        "Kelvin image of (N, a) = ({n}, {a}) not found on the paired arc (distance {distance:e})"
    )]
    PairingFailure { n: f64, a: f64, distance: f64 },

    #[error("solver failed at a = {a}: {source}")]
    AtSample { a: f64, source: Box<Error> },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Variant name, for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AtSample { source, .. } => source.kind(),
            Error::InvalidConfig { .. } => "InvalidConfig",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::StepLimitExceeded { .. } => "StepLimitExceeded",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::LevelMismatch { .. } => "LevelMismatch",
            Error::TailNotNegligible { .. } => "TailNotNegligible",
            Error::NoLargestZero { .. } => "NoLargestZero",
            Error::ParamMismatch { .. } => "ParamMismatch",
            Error::UnresolvedCritical { .. } => "UnresolvedCritical",
            Error::OnCriticalValue { .. } => "OnCriticalValue",
            Error::OnTwoN { .. } => "OnTwoN",
            Error::NoSignChange { .. } => "NoSignChange",
            Error::CrossingNotFound { .. } => "CrossingNotFound",
            Error::SeedFailure { .. } => "SeedFailure",
            Error::ZeroCountJump { .. } => "ZeroCountJump",
            Error::PairingFailure { .. } => "PairingFailure",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn at_sample(self, a: f64) -> Self {
        match self {
            Error::AtSample { .. } => self,
            other => Error::AtSample {
                a,
                source: Box::new(other),
            },
        }
    }
}

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

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),

    #[error("polarization parameters not unit norm (|p|^2 = {norm_sq})")]
    NotUnitNorm { norm_sq: f64 },

    #[error("lane skew {skew} samples outside the supported range of +/-{limit}")]
    SkewOutOfRange { skew: f64, limit: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("LMS diverged with step size mu = {mu} at iteration {iteration}")]
    Diverged { mu: f64, iteration: usize },

    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("lane {lane} is unidentifiable: dominant branch magnitude {magnitude:.3} below 0.1")]
    Unidentifiable { lane: usize, magnitude: f64 },

    #[error("polarization pattern mismatch: projection residual {residual:.3} exceeds 0.2")]
    PatternMismatch { residual: f64 },

    #[error("frequency grids differ")]
    GridMismatch,

    #[error("empty input")]
    Empty,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

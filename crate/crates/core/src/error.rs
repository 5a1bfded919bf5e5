use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires a finite ultraviolet cutoff")]
    InfiniteCutoff,

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {evaluations} evaluations")]
    QuadratureNotConverged {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("field vectors live on different momentum grids")]
    GridMismatch,

    #[error("evaluation time {t} exceeds path horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("Fock basis of dimension {dim} exceeds the cap {cap}")]
    BasisTooLarge { dim: usize, cap: usize },

    #[error("complex momentum {im} outside the analyticity strip of half-width {m_p}")]
    OutsideStrip { im: f64, m_p: f64 },

    #[error("unsupported field sector: {0}")]
    UnsupportedSector(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

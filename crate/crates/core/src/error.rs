//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A state coordinate became NaN or infinite after projection. Signals an
    /// integrator blow-up; must not happen for in-range inputs.
    #[error("non-finite state: {0}")]
    NonFiniteState(String),

    /// A log-density or score was requested where the policy distribution has
    /// collapsed to a point mass (e.g. Gaussian with sigma = 0).
    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    /// The separation between the coupled trajectories reached exactly zero
    /// before anything could be accumulated.
    #[error("trajectory separation collapsed to zero")]
    ZeroSeparation,

    /// All objective samples at one perturbation scale were identical.
    #[error("degenerate variance: all samples identical at sigma={0}")]
    DegenerateVariance(f64),

    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    /// A serialized parameter vector does not match its declared layout.
    #[error("theta layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteState(_)
                | Error::DegenerateDensity(_)
                | Error::ZeroSeparation
                | Error::DegenerateVariance(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

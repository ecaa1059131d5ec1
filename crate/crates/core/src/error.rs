use thiserror::Error;

/// Errors raised by the library.
///
/// `Invalid*` variants are caller mistakes; `Invariant` means a numeric
/// self-check failed and the result should not be trusted.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid medium: {0}")]
    InvalidMedium(String),
    #[error("photon frequency must be positive, got {omega} rad/s (detuning {delta} rad/s)")]
    NonPositiveFrequency { omega: f64, delta: f64 },
    #[error("medium is opaque at detuning {delta} rad/s (transmissivity underflows)")]
    Opaque { delta: f64 },
    #[error("invalid probe state: {0}")]
    InvalidState(String),
    #[error("photon number {n} exceeds the supported maximum {max}")]
    PhotonNumberTooLarge { n: usize, max: usize },
    #[error("invalid detuning grid: {0}")]
    InvalidGrid(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("Fisher information {0} is not positive: variance is unbounded")]
    UnboundedVariance(f64),
    #[error("numeric invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

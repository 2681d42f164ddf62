//! Time-harmonic elastic (Navier) wave scattering by clusters of small,
//! high-mass-density resonant inclusions.
//!
//! The crate covers the full pipeline: evaluation of the Kupradze/Kelvin
//! fundamental matrices, spectral analysis of the static Navier volume
//! operator on a reference shape, construction of resonant clusters, the
//! Foldy-Lax point-interaction system with its Born truncations, scattered
//! and far field synthesis, and the homogenized (effective-medium)
//! Lippmann-Schwinger problem with far-field comparison.

pub mod effective;
pub mod fields;
pub mod foldy;
pub mod geometry;
pub mod kernels;
pub mod material;
pub mod scenario;
pub mod shapes;
pub mod spectra;
pub mod sweep;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular evaluation: source and observation points coincide")]
    CoincidentPoints,
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),
    #[error("invalid plane wave: {0}")]
    InvalidPlaneWave(String),
    #[error("convergence condition violated: {0}")]
    ConvergenceCondition(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("unknown shape '{0}'")]
    UnknownShape(String),
    #[error("eigendecomposition requires a symmetric matrix (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("spectrum is empty")]
    EmptySpectrum,
    #[error("spectral gap undefined: spectrum has a single eigenvalue cluster")]
    UndefinedGap,
    #[error("eigenvalue index {0} out of range ({1} clusters)")]
    EigenIndexOutOfRange(usize, usize),
    #[error("no real resonance: eigenvalue {0:.6e} is not positive")]
    NoRealResonance(f64),
    #[error("negative radicand in frequency selection: 1 - b*a^h = {0:.6e}")]
    NegativeRadicand(f64),
    #[error("singular scattering coefficient: frequency is exactly at resonance")]
    SingularCoefficient,
    #[error("regime violation: {0}")]
    RegimeViolation(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("cluster has fewer than two inclusions")]
    SingleInclusion,
    #[error("near-resonant system: condition estimate {0:.3e} exceeds threshold")]
    NearResonantSystem(f64),
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("fixed-point iteration did not converge after {0} iterations (residual {1:.3e})")]
    IterationFailure(usize, f64),
    #[error("dense mode refused: {0} cells exceeds the dense limit of {1}")]
    DenseLimit(usize, usize),
    #[error("observation point lies inside inclusion {0}")]
    PointInsideInclusion(usize),
    #[error("mismatched direction grids: {0} vs {1} directions")]
    DirectionMismatch(usize, usize),
    #[error("sweep needs at least {0} values of a (got {1})")]
    SweepTooShort(usize, usize),
    #[error("unknown solver '{0}'")]
    UnknownSolver(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, analysis, and integration routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (deviation {deviation:.3e} exceeds {tolerance:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid spectral density: {0}")]
    InvalidSpectralDensity(String),

    #[error("chain recurrence lost positivity at index {index} (beta = {beta:.3e}); increase quadrature order")]
    RecurrenceBreakdown { index: usize, beta: f64 },

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("Fock truncation leakage {leakage:.3e} exceeds {tolerance:.3e}; increase n_fock")]
    FockLeakage { leakage: f64, tolerance: f64 },

    #[error("state space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("inputs span {rank} of {needed} dimensions")]
    NonSpanningInputs { rank: usize, needed: usize },

    #[error("map is singular or ill-conditioned (condition number {cond:.3e} exceeds cap {cap:.3e})")]
    IllConditioned { cond: f64, cap: f64 },

    #[error("channel is not unital (defect {0:.3e}); random-unitary decomposition requires unitality")]
    NotUnital(f64),

    #[error("optimization did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

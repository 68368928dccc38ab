//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the solver suite.
#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition was violated (non-positive argument etc.).
    #[error("domain error: {0}")]
    Domain(String),

    /// The closed-form coefficient is not defined: the discount is too weak
    /// relative to growth and jump aggressiveness.
    #[error("ill-posed exact solution: denominator {denom:.6e} <= 0 (insufficient discounting)")]
    IllPosed { denom: f64 },

    /// Every raw quadrature weight vanished; the density cannot be normalized.
    #[error("degenerate jump density: all quadrature weights are zero")]
    DegenerateDensity,

    /// A sweep produced a non-finite value; the iteration cannot continue.
    #[error("non-finite value at vertex ({i},{j}) in sweep {sweep}")]
    NonFinite { i: usize, j: usize, sweep: usize },

    /// Invalid configuration (bad parameter ranges, missing blocks, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Monte Carlo estimation could not produce a trustworthy estimate.
    #[error("simulation failure: {0}")]
    Simulation(String),

    /// Malformed input data (CSV parse errors etc.).
    #[error("data error: {0}")]
    Data(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

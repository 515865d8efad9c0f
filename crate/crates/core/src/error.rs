use thiserror::Error;

/// Errors raised by the simulation and calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A device or pump description violates a structural invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Dimensions of two inputs disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The rotating frames of the two mechanical modes coincide.
    #[error("model validity: {0}")]
    Validity(String),

    /// Least-squares fit could not be performed.
    #[error("fit error: {0}")]
    Fit(String),

    /// `M - iωI` could not be inverted.
    #[error("singular resolvent at omega = {omega:e} rad/s (condition number {condition:e})")]
    Singular { omega: f64, condition: f64 },

    /// The transmission ratio has an exactly vanishing denominator.
    #[error("transmission ratio is singular: forward transmission vanishes")]
    SingularRatio,

    /// No pump phase produces perfect isolation.
    #[error("no isolating phase exists: {0}")]
    NoIsolatingPhase(String),

    /// Time-domain integration did not settle.
    #[error("no steady state after {t_end:e} s (relative change {residual:e})")]
    Convergence { t_end: f64, residual: f64 },

    /// Referring noise to the input would divide by a vanishing transmission.
    #[error("referred noise overflow on path {to}<-{from}: |S| = {magnitude:e}")]
    ReferredNoise { to: usize, from: usize, magnitude: f64 },

    /// Inconsistent calibration data.
    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

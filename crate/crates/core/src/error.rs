//! Error type shared across the crate.

use std::fmt;

use crate::schedule::Mode;

/// Errors produced by configuration validation, the analytic formulas, and
/// the simulation engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration field failed validation.
    InvalidConfig {
        field: &'static str,
        message: String,
    },
    /// An operating point outside the three-mode region (duty must lie in
    /// (0.5, 1) so that a both-switches-on interval exists).
    UnsupportedOperatingRegion { message: String },
    /// A design target that no duty cycle in the supported region can reach.
    InfeasibleTarget { message: String },
    /// The state vector left the realm of finite floating point.
    NumericalFailure {
        mode: Mode,
        time: f64,
        message: String,
    },
    /// An operation received input it cannot work with (empty series,
    /// negative magnitudes, mismatched lengths).
    InvalidInput { message: String },
    /// A named waveform column is absent.
    MissingColumn { name: String },
    /// An operation required a converged steady state but got a transient.
    NotConverged { cycles: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig { field, message } => {
                write!(f, "invalid configuration: {field}: {message}")
            }
            Error::UnsupportedOperatingRegion { message } => {
                write!(f, "unsupported operating region: {message}")
            }
            Error::InfeasibleTarget { message } => write!(f, "infeasible target: {message}"),
            Error::NumericalFailure {
                mode,
                time,
                message,
            } => {
                write!(
                    f,
                    "numerical failure in mode {mode} at t = {time:.9e} s: {message}"
                )
            }
            Error::InvalidInput { message } => write!(f, "invalid input: {message}"),
            Error::MissingColumn { name } => write!(f, "missing waveform column: {name}"),
            Error::NotConverged { cycles } => {
                write!(
                    f,
                    "simulation did not reach periodic steady state after {cycles} cycles"
                )
            }
        }
    }
}

impl std::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

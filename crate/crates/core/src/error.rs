//! Error type shared by every module of the crate.

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::EdgeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Domain { field: &'static str, reason: String },

    /// A cot/csc argument sits on a zero of sin.
    #[error("pole on edge {edge}: sin({theta}) vanishes")]
    Pole { edge: EdgeId, theta: Complex64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("boundary system is singular at z = {z} (|det| = {det:e})")]
    SingularDenominator { z: Complex64, det: f64 },

    #[error("dispersion denominator too small: |D(k)| = {0:e}")]
    NearSingularDispersion(f64),

    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("window endpoint k = {0} sits on a pole")]
    WindowAtPole(f64),

    #[error("k = {k} is not a root (residual {residual:e})")]
    NotARoot { k: f64, residual: f64 },

    #[error("state leaves the effective space (remainder {0:e})")]
    NotInEffectiveSpace(f64),

    #[error("input support exceeds the truncation window")]
    SupportExceedsWindow,

    #[error("config: {0}")]
    Config(String),

    #[error("write failed: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    /// Rejected input, as opposed to a failure of the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::GridMismatch(_) | Error::WindowAtPole(_) | Error::SupportExceedsWindow | Error::Config(_)
        )
    }
}

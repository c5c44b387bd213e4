//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by the analytic model, the oracles, and the detection
/// layer.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input parameters violate a precondition (negative mean photon
    /// numbers, non-finite values, malformed ranges, ...).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The nonclassicality parameters are 0/0 at the vacuum origin
    /// (`mu1 = mu2 = muk = 0`) and carry no correlations to classify.
    #[error("nonclassicality parameters are undefined at the vacuum origin")]
    UndefinedPoint,

    /// A truncated Fock-space computation could not reach the requested
    /// accuracy at the given depth.
    #[error("truncation tolerance not met (defect {defect:.3e} at depth {depth})")]
    Truncation { defect: f64, depth: usize },

    /// An eigenvalue computation failed to converge or produced values
    /// outside the admissible range.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A statistical estimate was requested from a record that cannot
    /// support it.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The requested quantity is not defined for this configuration.
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

//! CLI error type with the exit-code contract: 1 for usage or
//! configuration problems, 2 for numerical failures, 3 for I/O.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Library errors map onto the numerical exit code except for bad
/// parameters, which are the caller's usage problem. The undefined origin
/// is not routed here: commands that can hit it handle it explicitly.
impl From<twinbeam::Error> for CliError {
    fn from(e: twinbeam::Error) -> Self {
        match e {
            twinbeam::Error::InvalidParams(_) | twinbeam::Error::NotApplicable(_) => {
                CliError::Usage(e.to_string())
            }
            twinbeam::Error::InsufficientData(_) => CliError::Usage(e.to_string()),
            twinbeam::Error::UndefinedPoint
            | twinbeam::Error::Truncation { .. }
            | twinbeam::Error::NumericalFailure(_) => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

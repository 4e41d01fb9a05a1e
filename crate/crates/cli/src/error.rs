//! Error-to-exit-code mapping.
//!
//! The binary distinguishes two failure classes: problems with how it was
//! invoked (bad flags, unreadable files, malformed configs or data) exit
//! with 1, numerical failures inside a run (divergence, non-finite losses,
//! empty result cells) exit with 2.

use std::fmt;

/// Failure of a command, tagged by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Usage, configuration, or input problem (exit code 1).
    Usage(String),
    /// Numerical failure during a run (exit code 2).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Numeric(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<aglnet::Error> for CliError {
    fn from(e: aglnet::Error) -> Self {
        match &e {
            aglnet::Error::Config(_) | aglnet::Error::DimensionMismatch(_) => {
                CliError::Usage(e.to_string())
            }
            aglnet::Error::Diverged { .. }
            | aglnet::Error::NonFiniteGradient
            | aglnet::Error::Contract(_)
            | aglnet::Error::Reducible(_)
            | aglnet::Error::EmptyCell { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Wraps an I/O error with the path it concerns. All I/O problems count as
/// usage errors.
pub fn io_error(context: &str, path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("cannot {context} {}: {e}", path.display()))
}

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two values that must agree do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An invariant required by an operation's contract is violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A gradient contained NaN or infinity.
    #[error("non-finite gradient")]
    NonFiniteGradient,

    /// The training objective stopped being finite.
    #[error("training diverged at epoch {epoch}: objective is not finite")]
    Diverged { epoch: usize },

    /// An operation that requires an irreducible network was given a
    /// reducible one.
    #[error("model is reducible: {0}")]
    Reducible(String),

    /// A metric was requested for a (sigma2, method) cell with no recorded
    /// replications.
    #[error("no replications recorded for sigma2={sigma2}, method={method}")]
    EmptyCell { sigma2: f64, method: String },
}

pub type Result<T> = std::result::Result<T, Error>;

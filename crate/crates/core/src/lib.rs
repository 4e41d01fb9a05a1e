//! Feature selection for one-hidden-layer tanh networks via the adaptive
//! group lasso.
//!
//! The crate trains `(n_inputs, n_hidden, 1)` tanh networks under group
//! penalties on first-layer columns, selects features by thresholding the
//! fitted column norms, and provides the surrounding machinery: pipelines
//! with cross-validated hyperparameters, an identifiability toolkit
//! (sign-flip/interchange equivalence, irreducibility, distance modulo the
//! equivalence class), synthetic-data generation, and selection metrics.

pub mod assignment;
pub mod check;
pub mod equivalence;
pub mod error;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod penalty;
pub mod pipeline;
pub mod seed;
pub mod simgen;

pub use equivalence::{EquivTransform, IrreducibilityReport, IrreducibilityViolation, Sign};
pub use error::{Error, Result};
pub use metrics::{ExperimentCell, ExperimentReport};
pub use net::{Dataset, LossKind, NetworkParams, Task};
pub use optim::{AdamState, TrainConfig, TrainMode};
pub use penalty::{AdaptiveWeight, AdaptiveWeights, GroupNorms, PenaltySpec};
pub use pipeline::{CvEntry, Grids, Method, PipelineConfig, SelectionResult};
pub use simgen::{GroundTruthModel, SimConfig};

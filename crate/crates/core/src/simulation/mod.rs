//! Seeded Monte Carlo harness over strategy profiles.
//!
//! Every trial draws from its own ChaCha stream keyed by `(seed, trial)`,
//! so reports are identical between serial and parallel execution and
//! aggregation only sums counts.

pub mod detection;
pub mod stats;
pub mod strategy;
pub mod trials;
pub mod validate;

use thiserror::Error;

pub use detection::{estimate_detection_curve, DetectionCurve, DetectionPoint};
pub use stats::{clopper_pearson, z_score, Estimate};
pub use strategy::{Strategy, StrategyKind};
pub use trials::{run_trials, Execution, TrialReport, TrialSpec};
pub use validate::{
    cell_spec, default_grid, validate_against_analysis, GridCell, ValidationRow, ValidationTable,
};

use crate::analysis::AnalysisError;
use crate::protocol::ProtocolError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SimulationError {
    SimulationError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

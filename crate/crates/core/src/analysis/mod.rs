//! Fairness numerics: probability to reject, probability to cheat, its
//! alpha-average, the supremum over the abort step and its scaling in `N`.
//!
//! Pointwise functions work in log space so they stay finite up to
//! `N = 8000`; full curves use [`sweep::Sweep`], which walks `m = 0..=N`
//! with incremental hypergeometric updates.

pub mod alpha;
pub mod export;
pub mod fairness;
pub mod logprob;
pub mod oracle;
pub mod quadrature;
pub mod risk;
pub mod scaling;
pub mod sweep;
pub mod threshold;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alpha::AlphaDistribution;
pub use fairness::{
    binom_tail, detection_prob, detection_prob_rotated, detection_prob_rotated_exact,
    detection_prob_rotated_uniform, hypergeom_pmf, prob_cheat, prob_reject, prob_reject_avg,
    prob_reject_with_rule, reject_ability, split_weights,
};
pub use logprob::LogProb;
pub use risk::{chebyshev_risk_check, RiskCheck};
pub use scaling::{scaling_fit, ScalingFit};
pub use sweep::{expected_prob_cheat, sup_expected_cheat, FairnessCurve};
pub use threshold::ThresholdRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("fixed-equal split needs an even N, got {0}")]
    OddFixedSplit(usize),
    #[error("invalid alpha distribution: {0}")]
    InvalidAlphaDistribution(String),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    QuadratureNotConverged { estimate: f64, error_bound: f64 },
    #[error("scaling fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("scaling fit has duplicate N = {0}")]
    DuplicateN(usize),
    #[error("scaling fit needs positive N and sup values, got ({n}, {value})")]
    NonPositivePoint { n: usize, value: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> AnalysisError {
    AnalysisError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// How the `N` preparations divide between the Accept and Reject bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitModel {
    /// `N_R ~ Binomial(N, 1/2)`.
    #[default]
    Binomial,
    /// `N_R = N_A = N/2`.
    FixedEqual,
}

impl SplitModel {
    pub fn check(self, n: usize) -> Result<(), AnalysisError> {
        if self == SplitModel::FixedEqual && n % 2 == 1 {
            return Err(AnalysisError::OddFixedSplit(n));
        }
        Ok(())
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitModel::Binomial => "binomial",
            SplitModel::FixedEqual => "fixed_equal",
        }
    }
}

impl std::str::FromStr for SplitModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "binomial" => Ok(SplitModel::Binomial),
            "fixed_equal" | "fixed" | "equal" => Ok(SplitModel::FixedEqual),
            other => Err(format!(
                "unknown split model '{other}' (binomial | fixed-equal)"
            )),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), AnalysisError> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("{alpha} outside (1/2, 1)")))
    }
}

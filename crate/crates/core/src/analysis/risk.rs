//! Chebyshev-style risk bound on the random variable `Y = P_ch(m; alpha)`.
//!
//! If `E(Y) <= delta^3` then `Prob_alpha[Y < delta + delta^3] >= 1 - delta`.
//! The check computes the left-hand side directly from the same alpha pieces
//! the sweep uses and confirms the inequality.

use serde::{Deserialize, Serialize};

use super::alpha::AlphaDistribution;
use super::sweep::Sweep;
use super::{invalid, AnalysisError, SplitModel};

/// Slack on `E(Y) <= delta^3`, so `delta = E(Y)^(1/3)` counts as the boundary case.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCheck {
    pub delta: f64,
    /// `delta + delta^3`.
    pub threshold: f64,
    /// `E(Y)`, the expected probability to cheat.
    pub expected: f64,
    /// `Prob_alpha[Y < threshold]`.
    pub probability: f64,
    /// Whether `E(Y) <= delta^3`, i.e. whether the bound is claimed at all.
    pub claimed: bool,
    /// `probability >= 1 - delta`.
    pub satisfied: bool,
}

impl RiskCheck {
    /// True unless the bound is claimed and violated.
    pub fn passes(&self) -> bool {
        !self.claimed || self.satisfied
    }
}

pub fn chebyshev_risk_check(
    big_n: usize,
    m: usize,
    delta: f64,
    dist: &AlphaDistribution,
    split: SplitModel,
    quad_tol: f64,
) -> Result<RiskCheck, AnalysisError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} outside (0, 1)")));
    }
    if m > big_n {
        return Err(invalid("m", format!("{m} exceeds N = {big_n}")));
    }
    let sweep = Sweep::new(big_n, split, dist, quad_tol)?;
    let threshold = delta + delta.powi(3);
    let (mut expected, mut exceed) = (0.0, 0.0);
    sweep.run(m, m, |_, pr| {
        expected = sweep.expected_cheat(pr);
        for (piece, p) in sweep.pieces().iter().zip(pr) {
            if p * (1.0 - p) >= threshold {
                exceed += piece.mass;
            }
        }
    });
    let probability = (1.0 - exceed).clamp(0.0, 1.0);
    let claimed = expected <= delta.powi(3) * (1.0 + BOUNDARY_SLACK);
    Ok(RiskCheck {
        delta,
        threshold,
        expected,
        probability,
        claimed,
        satisfied: probability >= 1.0 - delta,
    })
}

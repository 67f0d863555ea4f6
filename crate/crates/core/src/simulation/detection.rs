//! Empirical detection probability as a function of cheating rounds.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::{clopper_pearson, Estimate};
use super::strategy::{Strategy, StrategyKind};
use super::trials::{run_trials, Execution, TrialSpec};
use super::{invalid, SimulationError};
use crate::analysis::{detection_prob, detection_prob_rotated_uniform, AlphaDistribution};
use crate::protocol::Intent;
use crate::quantum::NoiseModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPoint {
    /// Number of cheating rounds.
    pub delta_m: u32,
    /// Round in which the `delta_m`-th cheating measurement is reported.
    pub round: usize,
    pub estimate: Estimate,
    pub exact: f64,
    /// Simultaneous (Bonferroni) 95% interval over all points.
    pub band_lo: f64,
    pub band_hi: f64,
}

impl DetectionPoint {
    pub fn within_ci(&self) -> bool {
        self.estimate.contains(self.exact)
    }

    pub fn within_band(&self) -> bool {
        self.band_lo <= self.exact && self.exact <= self.band_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCurve {
    pub strategy: StrategyKind,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub points: Vec<DetectionPoint>,
}

impl DetectionCurve {
    pub fn all_within_ci(&self) -> bool {
        self.points.iter().all(DetectionPoint::within_ci)
    }

    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("delta_m,round,empirical,exact,ci_lo,ci_hi,band_lo,band_hi,within_ci\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{:.10},{:.10},{:.10},{:.10},{:.10},{:.10},{}",
                p.delta_m,
                p.round,
                p.estimate.p,
                p.exact,
                p.estimate.ci_lo,
                p.estimate.ci_hi,
                p.band_lo,
                p.band_hi,
                p.within_ci()
            );
        }
        out
    }
}

/// Bob plays `strategy` against an honest Alice with zero noise and zero
/// tolerance, so the first checkable wrong report aborts. Point `dm` counts
/// trials aborted by the round holding Bob's `dm`-th cheating report and is
/// compared with `1 - ((3 + q_a)/4)^dm` (`q_a = 0` outside rotations).
pub fn estimate_detection_curve(
    strategy: &StrategyKind,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<DetectionCurve, SimulationError> {
    if n == 0 {
        return Err(invalid("n", "need at least one round"));
    }
    let spec = TrialSpec {
        n,
        alice: Strategy::honest(Intent::Bind),
        bob: Strategy::new(strategy.clone(), Intent::Bind),
        noise: NoiseModel::ideal(),
        alpha_dist: AlphaDistribution::default(),
        trials,
        seed,
    };
    let report = run_trials(&spec, Execution::Parallel)?;
    let q_a = strategy.accept_equivalence();
    let cheat_rounds: Vec<usize> = (1..=n).filter(|&r| strategy.cheats_in(r)).collect();
    let band_alpha = 0.05 / cheat_rounds.len().max(1) as f64;
    let mut cumulative = 0u64;
    let mut last = 0usize;
    let mut points = Vec::with_capacity(cheat_rounds.len());
    for (i, &round) in cheat_rounds.iter().enumerate() {
        cumulative += report.abort_histogram[last + 1..=round].iter().sum::<u64>();
        last = round;
        let dm = (i + 1) as u32;
        let exact = match strategy {
            StrategyKind::Rotated { .. } => detection_prob_rotated_uniform(dm, q_a),
            _ => detection_prob(dm),
        };
        let (band_lo, band_hi) = clopper_pearson(cumulative, trials, band_alpha);
        points.push(DetectionPoint {
            delta_m: dm,
            round,
            estimate: Estimate::new(cumulative, trials),
            exact,
            band_lo,
            band_hi,
        });
    }
    Ok(DetectionCurve {
        strategy: strategy.clone(),
        n,
        trials,
        seed,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untilted_rotation_is_never_detected() {
        let c = estimate_detection_curve(&"rotated:0,0".parse().unwrap(), 12, 2000, 3).unwrap();
        assert!(c
            .points
            .iter()
            .all(|p| p.estimate.successes == 0 && p.exact.abs() < 1e-15));
    }

    #[test]
    fn mixed_reject_points_sit_on_cheating_rounds() {
        let c = estimate_detection_curve(&"mixed-reject:2,5,9".parse().unwrap(), 12, 20_000, 5)
            .unwrap();
        let rounds: Vec<usize> = c.points.iter().map(|p| p.round).collect();
        assert_eq!(rounds, vec![2, 5, 9]);
        assert!(
            c.points.iter().all(DetectionPoint::within_band),
            "{:?}",
            c.points
        );
    }

    #[test]
    fn quarter_turn_matches_reject() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let c = estimate_detection_curve(
            &StrategyKind::Rotated {
                theta: half_pi,
                phi: 0.0,
                rounds: None,
            },
            8,
            20_000,
            9,
        )
        .unwrap();
        for p in &c.points {
            assert!((p.exact - detection_prob(p.delta_m)).abs() < 1e-12);
            assert!(p.within_band(), "{p:?}");
        }
    }
}

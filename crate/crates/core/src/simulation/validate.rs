//! Monte Carlo reject ability against the analytic average.

use std::fmt::Write as _;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::stats::z_score;
use super::strategy::Strategy;
use super::trials::{count_valid, TrialSpec};
use super::{invalid, SimulationError};
use crate::analysis::{prob_reject_avg, AlphaDistribution, SplitModel};
use crate::protocol::Intent;
use crate::quantum::NoiseModel;
use crate::rng::stream_rng;

/// Number of standard deviations a cell may deviate by.
pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    /// Accept measurements Alice made before the exchange stopped.
    pub m: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub cell: GridCell,
    pub trials: u64,
    pub rejections: u64,
    pub empirical: f64,
    pub analytic: f64,
    pub sigma: f64,
    pub z: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTable {
    pub seed: u64,
    pub trials_per_cell: u64,
    pub rows: Vec<ValidationRow>,
}

impl ValidationTable {
    pub fn passed_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.passed).count()
    }

    pub fn pass_fraction(&self) -> f64 {
        self.passed_cells() as f64 / self.rows.len().max(1) as f64
    }

    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("n,m,alpha,trials,rejections,empirical,analytic,sigma,z,passed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.10},{:.10},{:.3e},{:.4},{}",
                r.cell.n,
                r.cell.m,
                r.cell.alpha,
                r.trials,
                r.rejections,
                r.empirical,
                r.analytic,
                r.sigma,
                r.z,
                r.passed
            );
        }
        out
    }
}

/// `N in {2, 12, 40, 100}`, `m in {0, 1, N/4, N/2, N}` (deduplicated),
/// `alpha in {0.55, 0.7, 0.9}`.
pub fn default_grid() -> Vec<GridCell> {
    let mut cells = Vec::new();
    for n in [2usize, 12, 40, 100] {
        let mut ms = vec![0, 1, n / 4, n / 2, n];
        ms.sort_unstable();
        ms.dedup();
        for m in ms {
            for alpha in [0.55, 0.7, 0.9] {
                cells.push(GridCell { n, m, alpha });
            }
        }
    }
    cells
}

/// The session scenario behind a cell: Alice measures Accept for `m`
/// rounds, the exchange stops (Bob halts, or Alice at `m = 0`), Alice then
/// refuses and Bob binds under a fixed alpha. The contract is invalid
/// exactly when Alice proves Reject, so the invalid frequency estimates her
/// reject ability after `m` rounds.
pub fn cell_spec(cell: GridCell, trials: u64, seed: u64) -> Result<TrialSpec, SimulationError> {
    if cell.m > cell.n {
        return Err(invalid("m", format!("{} exceeds N = {}", cell.m, cell.n)));
    }
    let (alice, bob) = if cell.m == 0 {
        (
            Strategy::honest(Intent::Refuse).halting_after(0),
            Strategy::honest(Intent::Bind),
        )
    } else {
        (
            Strategy::honest(Intent::Refuse),
            Strategy::honest(Intent::Bind).halting_after(cell.m - 1),
        )
    };
    Ok(TrialSpec {
        n: cell.n,
        alice,
        bob,
        noise: NoiseModel::ideal(),
        alpha_dist: AlphaDistribution::point(cell.alpha)?,
        trials,
        seed,
    })
}

/// Runs every cell with its own seed derived from `seed` and the cell
/// index, and compares against `prob_reject_avg` with the binomial split.
/// A cell passes when `|p_hat - p| <= 4 sigma`; at `sigma = 0` the match
/// must be exact.
pub fn validate_against_analysis(
    grid: &[GridCell],
    trials: u64,
    seed: u64,
) -> Result<ValidationTable, SimulationError> {
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &cell) in grid.iter().enumerate() {
        let cell_seed = stream_rng(seed, (1u64 << 63) | i as u64).next_u64();
        let spec = cell_spec(cell, trials, cell_seed)?;
        let (valid, _) = count_valid(&spec)?;
        let rejections = trials - valid;
        let analytic = prob_reject_avg(cell.m, cell.alpha, cell.n, SplitModel::Binomial)?.prob();
        let empirical = rejections as f64 / trials as f64;
        let sigma = (analytic * (1.0 - analytic) / trials as f64)
            .max(0.0)
            .sqrt();
        let z = z_score(rejections, trials, analytic);
        rows.push(ValidationRow {
            cell,
            trials,
            rejections,
            empirical,
            analytic,
            sigma,
            z,
            passed: z.abs() <= Z_LIMIT,
        });
    }
    Ok(ValidationTable {
        seed,
        trials_per_cell: trials,
        rows,
    })
}

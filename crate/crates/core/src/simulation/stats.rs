//! Exact binomial confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

/// Clopper-Pearson interval for `k` successes in `n` trials at two-sided
/// level `1 - alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "need 0 <= k <= n, n > 0");
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        inv_beta_reg(kf, nf - kf + 1.0, alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        inv_beta_reg(kf + 1.0, nf - kf, 1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// An empirical probability with its 95% Clopper-Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Half the interval width.
    pub half_width: f64,
}

impl Estimate {
    pub fn new(successes: u64, trials: u64) -> Estimate {
        let (ci_lo, ci_hi) = clopper_pearson(successes, trials, 0.05);
        Estimate {
            successes,
            trials,
            p: successes as f64 / trials as f64,
            ci_lo,
            ci_hi,
            half_width: 0.5 * (ci_hi - ci_lo),
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_lo <= p && p <= self.ci_hi
    }
}

/// `(p_hat - p) / sqrt(p (1 - p) / n)`; zero when both agree exactly at a
/// degenerate `p`, infinite when they disagree there.
pub fn z_score(successes: u64, trials: u64, p: f64) -> f64 {
    let p_hat = successes as f64 / trials as f64;
    let var = p * (1.0 - p) / trials as f64;
    if var <= 0.0 {
        if (p_hat - p).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (p_hat - p) / var.sqrt()
    }
}

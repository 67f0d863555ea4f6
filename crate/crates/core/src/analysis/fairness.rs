//! Pointwise fairness quantities in log space.

use super::logprob::{log_factorials, log_sum_exp, LogProb};
use super::threshold::{allowed_wrong_with, wrong_limit, ThresholdRule};
use super::{check_alpha, invalid, AnalysisError, SplitModel};

/// `2^-n * sum_{i=0}^{min(T,n)} C(n, i)`; exact zero for `T < 0`.
pub fn binom_tail(n: usize, t: i64) -> LogProb {
    if t < 0 {
        return LogProb::ZERO;
    }
    let t = t as usize;
    if t >= n {
        return LogProb::ONE;
    }
    let lf = log_factorials(n);
    let terms: Vec<f64> = (0..=t).map(|i| lf.ln_choose(n, i)).collect();
    LogProb::from_ln(log_sum_exp(&terms) - n as f64 * std::f64::consts::LN_2)
}

/// Probability of being able to reject with `n` Reject-basis qubits among
/// those measured in the Accept basis.
pub fn reject_ability(n: usize, alpha: f64, n_reject: usize) -> LogProb {
    reject_ability_with(n, alpha, n_reject, ThresholdRule::Strict)
}

fn reject_ability_with(n: usize, alpha: f64, n_reject: usize, rule: ThresholdRule) -> LogProb {
    // For n below the limit every pattern stays under it, which binom_tail
    // returns as exactly 1 since T >= n there.
    binom_tail(n, allowed_wrong_with(alpha, n_reject, rule) as i64)
}

/// `C(m, n) C(N - m, N_R - n) / C(N, N_R)`.
pub fn hypergeom_pmf(n: usize, m: usize, n_reject: usize, big_n: usize) -> LogProb {
    if m > big_n || n_reject > big_n || n > m || n > n_reject || n_reject - n > big_n - m {
        return LogProb::ZERO;
    }
    let lf = log_factorials(big_n);
    LogProb::from_ln(
        lf.ln_choose(m, n) + lf.ln_choose(big_n - m, n_reject - n) - lf.ln_choose(big_n, n_reject),
    )
}

/// Probability that an honest party who measured the first `m` qubits in
/// the Accept basis can still reject, for a fixed `N_R`.
pub fn prob_reject(m: usize, alpha: f64, n_reject: usize, big_n: usize) -> LogProb {
    prob_reject_with_rule(m, alpha, n_reject, big_n, ThresholdRule::Strict)
}

pub fn prob_reject_with_rule(
    m: usize,
    alpha: f64,
    n_reject: usize,
    big_n: usize,
    rule: ThresholdRule,
) -> LogProb {
    assert!(m <= big_n && n_reject <= big_n, "need m, N_R <= N");
    if (m as i64) < wrong_limit(alpha, n_reject) {
        return LogProb::ONE;
    }
    let n_accept = big_n - n_reject;
    let lo = m.saturating_sub(n_accept);
    let hi = m.min(n_reject);
    let terms: Vec<f64> = (lo..=hi)
        .map(|n| {
            (hypergeom_pmf(n, m, n_reject, big_n) * reject_ability_with(n, alpha, n_reject, rule))
                .ln()
        })
        .collect();
    LogProb::from_ln(log_sum_exp(&terms))
}

/// `(N_R, ln q(N_R))` for every split with non-zero weight.
pub fn split_weights(big_n: usize, split: SplitModel) -> Result<Vec<(usize, f64)>, AnalysisError> {
    split.check(big_n)?;
    Ok(match split {
        SplitModel::FixedEqual => vec![(big_n / 2, 0.0)],
        SplitModel::Binomial => {
            let lf = log_factorials(big_n);
            let ln2n = big_n as f64 * std::f64::consts::LN_2;
            (0..=big_n)
                .map(|k| (k, lf.ln_choose(big_n, k) - ln2n))
                .collect()
        }
    })
}

/// Probability to reject averaged over the split model.
pub fn prob_reject_avg(
    m: usize,
    alpha: f64,
    big_n: usize,
    split: SplitModel,
) -> Result<LogProb, AnalysisError> {
    prob_reject_avg_with_rule(m, alpha, big_n, split, ThresholdRule::Strict)
}

pub fn prob_reject_avg_with_rule(
    m: usize,
    alpha: f64,
    big_n: usize,
    split: SplitModel,
    rule: ThresholdRule,
) -> Result<LogProb, AnalysisError> {
    check_alpha(alpha)?;
    if m > big_n {
        return Err(invalid("m", format!("{m} exceeds N = {big_n}")));
    }
    let weights = split_weights(big_n, split)?;
    let terms: Vec<f64> = weights
        .iter()
        .map(|&(nr, lq)| lq + prob_reject_with_rule(m, alpha, nr, big_n, rule).ln())
        .collect();
    // Divide by sum q, which is 1 up to rounding in the log-factorials.
    let norm: Vec<f64> = weights.iter().map(|(_, lq)| *lq).collect();
    Ok(LogProb::from_ln(log_sum_exp(&terms) - log_sum_exp(&norm)))
}

/// `P_ch = P_R (1 - P_R)` with `P_R` from [`prob_reject_avg`].
pub fn prob_cheat(
    m: usize,
    alpha: f64,
    big_n: usize,
    split: SplitModel,
) -> Result<LogProb, AnalysisError> {
    let pr = prob_reject_avg(m, alpha, big_n, split)?;
    if pr.is_zero() {
        return Ok(LogProb::ZERO);
    }
    Ok(LogProb::from_ln(pr.ln() + pr.ln_complement()))
}

/// `1 - (3/4)^dm`: chance that `dm` Reject measurements produce at least one
/// checkable wrong result.
pub fn detection_prob(delta_m: u32) -> f64 {
    -(0.75f64.ln() * delta_m as f64).exp_m1()
}

/// `1 - (1/2)^((1 - q_a) k_a)`, the equivalent-frequency approximation for
/// `k_a` rotated measurements on Accept-basis qubits.
pub fn detection_prob_rotated(k_a: u32, q_a: f64) -> f64 {
    -(0.5f64.ln() * (1.0 - q_a) * k_a as f64).exp_m1()
}

/// `1 - ((1 + q_a)/2)^k_a`, the exact per-qubit law for the same setting.
pub fn detection_prob_rotated_exact(k_a: u32, q_a: f64) -> f64 {
    -(((1.0 + q_a) / 2.0).ln() * k_a as f64).exp_m1()
}

/// Detection law for `dm` rotated measurements on uniformly prepared qubits
/// (Accept basis with probability 1/2): `1 - ((3 + q_a)/4)^dm`.
pub fn detection_prob_rotated_uniform(delta_m: u32, q_a: f64) -> f64 {
    -(((3.0 + q_a) / 4.0).ln() * delta_m as f64).exp_m1()
}

/// Binding probabilities averaged over a cheating strategy distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyAverage {
    /// Honest binder's chance when the cheater refuses.
    pub bind_honest: f64,
    /// Cheater's chance when the honest party refuses.
    pub bind_cheater: f64,
    /// `bind_cheater * (1 - bind_honest)`.
    pub cheat: f64,
}

/// Un-simplified strategy average. `weights` gives the probability that the
/// cheater measured the Reject observable on `dm` of the first `m` qubits.
/// The cheater's reject ability is that of an honest party interrupted `dm`
/// steps earlier, and both accept abilities are taken as 1.
pub fn strategy_averaged_bind(
    m: usize,
    alpha: f64,
    big_n: usize,
    split: SplitModel,
    weights: &[(usize, f64)],
) -> Result<StrategyAverage, AnalysisError> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if weights.is_empty() || weights.iter().any(|(_, w)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9
    {
        return Err(invalid("weights", "need non-negative weights summing to 1"));
    }
    if let Some((dm, _)) = weights.iter().find(|(dm, _)| *dm > m) {
        return Err(invalid("weights", format!("dm = {dm} exceeds m = {m}")));
    }
    let honest_reject = prob_reject_avg(m, alpha, big_n, split)?.prob();
    let mut cheater_reject = 0.0;
    for (dm, w) in weights {
        cheater_reject += w * prob_reject_avg(m - dm, alpha, big_n, split)?.prob();
    }
    let bind_honest = 1.0 - cheater_reject;
    let bind_cheater = 1.0 - honest_reject;
    Ok(StrategyAverage {
        bind_honest,
        bind_cheater,
        cheat: bind_cheater * (1.0 - bind_honest),
    })
}

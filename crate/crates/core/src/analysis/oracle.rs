//! Exact-rational brute force for small `N`.
//!
//! Every placement of the Reject-basis qubits is enumerated as a bitmask,
//! and every pattern of Accept-measurement outcomes on the Reject qubits
//! among the first `m` is enumerated as a bitmask of wrong results. No
//! closed forms are used, so this is an independent check of the log-space
//! code.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::fairness::{prob_reject_avg_with_rule, prob_reject_with_rule};
use super::threshold::ThresholdRule;
use super::SplitModel;

/// Enumeration is exponential; keep it small.
pub const MAX_ORACLE_N: usize = 16;

/// The alpha values checked by default, as exact fractions.
pub const ORACLE_ALPHAS: [(i64, i64); 3] = [(11, 20), (7, 10), (9, 10)];

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Largest integer strictly below `(1 - alpha) N_R`, floored at 0.
fn exact_allowed(alpha: &BigRational, n_reject: usize) -> usize {
    let limit = (BigRational::one() - alpha) * BigInt::from(n_reject);
    let ceil = limit.ceil().to_integer();
    (ceil - 1i32).to_i64().unwrap_or(0).max(0) as usize
}

/// Counts, for one `N`, how many Reject placements put exactly `n` Reject
/// qubits in the first `m` positions: `counts[N_R][m][n]`.
pub struct PlacementCounts {
    big_n: usize,
    counts: Vec<Vec<Vec<u64>>>,
}

impl PlacementCounts {
    pub fn new(big_n: usize) -> PlacementCounts {
        assert!(
            big_n <= MAX_ORACLE_N,
            "oracle limited to N <= {MAX_ORACLE_N}"
        );
        let mut counts = vec![vec![vec![0u64; big_n + 1]; big_n + 1]; big_n + 1];
        for mask in 0u32..(1u32 << big_n) {
            let nr = mask.count_ones() as usize;
            for m in 0..=big_n {
                let prefix = if m == 32 {
                    mask
                } else {
                    mask & ((1u32 << m) - 1)
                };
                counts[nr][m][prefix.count_ones() as usize] += 1;
            }
        }
        PlacementCounts { big_n, counts }
    }

    fn placements(&self, n_reject: usize) -> u64 {
        self.counts[n_reject][0][0]
    }
}

/// Number of `n`-bit wrong-result patterns with at most `allowed` wrong bits.
fn rejectable_patterns(n: usize, allowed: usize) -> u64 {
    (0u32..(1u32 << n))
        .filter(|p| p.count_ones() as usize <= allowed)
        .count() as u64
}

/// Exact probability to reject for fixed `N_R`.
pub fn prob_reject_exact(
    pc: &PlacementCounts,
    m: usize,
    alpha: &BigRational,
    n_reject: usize,
) -> BigRational {
    let limit = (BigRational::one() - alpha) * BigInt::from(n_reject);
    if BigRational::from_integer(BigInt::from(m)) < limit {
        return BigRational::one();
    }
    let allowed = exact_allowed(alpha, n_reject);
    let mut total = BigRational::zero();
    for (n, &count) in pc.counts[n_reject][m].iter().enumerate() {
        if count == 0 {
            continue;
        }
        let ok = rejectable_patterns(n, allowed);
        total += BigRational::new(
            BigInt::from(count) * BigInt::from(ok),
            BigInt::from(1u64) << n,
        );
    }
    total / BigInt::from(pc.placements(n_reject))
}

/// Exact split-averaged probability to reject.
pub fn prob_reject_avg_exact(
    pc: &PlacementCounts,
    m: usize,
    alpha: &BigRational,
    split: SplitModel,
) -> BigRational {
    let n = pc.big_n;
    match split {
        SplitModel::FixedEqual => prob_reject_exact(pc, m, alpha, n / 2),
        SplitModel::Binomial => {
            let mut total = BigRational::zero();
            for nr in 0..=n {
                total += prob_reject_exact(pc, m, alpha, nr) * BigInt::from(pc.placements(nr));
            }
            total / (BigInt::from(1u64) << n)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleFailure {
    pub n: usize,
    pub m: usize,
    pub n_reject: Option<usize>,
    pub split: Option<SplitModel>,
    pub alpha: f64,
    pub exact: f64,
    pub computed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub max_n: usize,
    pub cases: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub failures: Vec<OracleFailure>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        if got == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (got - want).abs() / want.abs()
    }
}

/// Compares the log-space functions against the enumeration for every
/// `N <= max_n`, `m`, `N_R` and alpha in [`ORACLE_ALPHAS`].
pub fn run_oracle_suite(max_n: usize, rule: ThresholdRule, tolerance: f64) -> OracleReport {
    let mut report = OracleReport {
        max_n,
        cases: 0,
        max_rel_err: 0.0,
        tolerance,
        failures: Vec::new(),
    };
    for n in 1..=max_n {
        let pc = PlacementCounts::new(n);
        for &(num, den) in &ORACLE_ALPHAS {
            let exact_alpha = ratio(num, den);
            let alpha = num as f64 / den as f64;
            let mut check =
                |m: usize, nr: Option<usize>, split: Option<SplitModel>, want: f64, got: f64| {
                    let e = rel_err(got, want);
                    report.cases += 1;
                    report.max_rel_err = report.max_rel_err.max(e);
                    if !(e <= tolerance) {
                        report.failures.push(OracleFailure {
                            n,
                            m,
                            n_reject: nr,
                            split,
                            alpha,
                            exact: want,
                            computed: got,
                        });
                    }
                };
            for m in 0..=n {
                for nr in 0..=n {
                    let want = prob_reject_exact(&pc, m, &exact_alpha, nr)
                        .to_f64()
                        .unwrap_or(f64::NAN);
                    let got = prob_reject_with_rule(m, alpha, nr, n, rule).prob();
                    check(m, Some(nr), None, want, got);
                }
                for split in [SplitModel::Binomial, SplitModel::FixedEqual] {
                    if split.check(n).is_err() {
                        continue;
                    }
                    let want = prob_reject_avg_exact(&pc, m, &exact_alpha, split)
                        .to_f64()
                        .unwrap_or(f64::NAN);
                    let got = prob_reject_avg_with_rule(m, alpha, n, split, rule)
                        .map(|p| p.prob())
                        .unwrap_or(f64::NAN);
                    check(m, None, Some(split), want, got);
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_exact_values() {
        let pc = PlacementCounts::new(2);
        let a = ratio(9, 10);
        assert_eq!(prob_reject_exact(&pc, 1, &a, 1), ratio(3, 4));
        assert_eq!(prob_reject_exact(&pc, 0, &a, 2), BigRational::one());
        // q = (1/4, 1/2, 1/4), P_R(2; N_R) = (1, 1/2, 1/4).
        assert_eq!(
            prob_reject_avg_exact(&pc, 2, &a, SplitModel::Binomial),
            ratio(9, 16)
        );
    }

    #[test]
    fn exact_threshold_uses_strict_inequality() {
        assert_eq!(exact_allowed(&ratio(3, 5), 10), 3);
        assert_eq!(exact_allowed(&ratio(9, 10), 1), 0);
        assert_eq!(exact_allowed(&ratio(9, 10), 11), 1);
        assert_eq!(exact_allowed(&ratio(9, 10), 0), 0);
    }

    #[test]
    fn suite_passes_and_detects_perturbation() {
        let ok = run_oracle_suite(8, ThresholdRule::Strict, 1e-12);
        assert!(ok.passed(), "{:?}", ok.failures.first());
        let bad = run_oracle_suite(8, ThresholdRule::PerturbedForTesting, 1e-12);
        assert!(!bad.passed());
    }
}

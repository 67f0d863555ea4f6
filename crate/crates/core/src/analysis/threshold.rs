//! Integer threshold convention shared by the Binding verdict and the
//! analysis.
//!
//! A party rejects when it has strictly fewer than `(1 - alpha) N_R` wrong
//! results on Reject-basis qubits, i.e. at most
//! `T = ceil((1 - alpha) N_R) - 1` of them. A party accepts when it presents
//! at least `ceil(alpha N_A)` correct Accept-basis results. With no
//! Reject-basis qubits there is nothing to get wrong, so `T` is floored at 0.

/// Relative distance under which a product is treated as an exact integer.
const SNAP: f64 = 1e-9;

/// `ceil(x)`, except that values within floating-point noise of an integer
/// snap to it (`(1 - 0.6) * 10` evaluates to `4.000000000000001`).
pub fn snapped_ceil(x: f64) -> i64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * x.abs().max(1.0) {
        r as i64
    } else {
        x.ceil() as i64
    }
}

/// Threshold rule selector. Only `Strict` is a valid convention; the
/// perturbed rule exists so verification tooling can prove it detects a
/// wrong convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    #[default]
    Strict,
    #[doc(hidden)]
    PerturbedForTesting,
}

/// Smallest number of wrong results that defeats a rejection, `ceil((1-alpha) N_R)`.
pub fn wrong_limit(alpha: f64, n_reject: usize) -> i64 {
    snapped_ceil((1.0 - alpha) * n_reject as f64)
}

/// Largest admissible number of wrong Reject-basis results, `T`.
pub fn allowed_wrong(alpha: f64, n_reject: usize) -> usize {
    allowed_wrong_with(alpha, n_reject, ThresholdRule::Strict)
}

pub fn allowed_wrong_with(alpha: f64, n_reject: usize, rule: ThresholdRule) -> usize {
    let t = (wrong_limit(alpha, n_reject) - 1).max(0) as usize;
    match rule {
        ThresholdRule::Strict => t,
        ThresholdRule::PerturbedForTesting => t + 1,
    }
}

/// Correct Accept-basis results needed to accept, `ceil(alpha N_A)`.
pub fn required_accept(alpha: f64, n_accept: usize) -> usize {
    snapped_ceil(alpha * n_accept as f64).max(0) as usize
}

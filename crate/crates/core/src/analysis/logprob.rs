//! Log-domain probabilities and the shared log-factorial table.

use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

/// A probability stored as its natural logarithm. `-inf` is exact zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan());
        LogProb(ln.min(0.0))
    }

    pub fn from_prob(p: f64) -> Self {
        if p <= 0.0 {
            LogProb::ZERO
        } else {
            LogProb::from_ln(p.ln())
        }
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `ln(1 - p)`, accurate when `p` is close to either end.
    pub fn ln_complement(self) -> f64 {
        if self.0 > -std::f64::consts::LN_2 {
            (-self.0.exp_m1()).ln()
        } else {
            (-self.0.exp()).ln_1p()
        }
    }
}

impl std::ops::Mul for LogProb {
    type Output = LogProb;
    fn mul(self, rhs: LogProb) -> LogProb {
        if self.is_zero() || rhs.is_zero() {
            LogProb::ZERO
        } else {
            LogProb::from_ln(self.0 + rhs.0)
        }
    }
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `ln(sum(exp(t)))`, max-shifted, with a compensated inner sum.
/// Returns `-inf` for an empty or all-zero input.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let acc: CompensatedSum = terms.iter().map(|t| (t - max).exp()).collect();
    max + acc.value().ln()
}

/// Table of `ln(k!)` for `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = CompensatedSum::default();
        table.push(0.0);
        for k in 1..=n {
            acc.add((k as f64).ln());
            table.push(acc.value());
        }
        LogFactorials { table }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.table[k]
    }

    /// `ln C(n, k)`, `-inf` when `k > n`.
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        if k > n {
            f64::NEG_INFINITY
        } else {
            self.table[n] - self.table[k] - self.table[n - k]
        }
    }
}

static SHARED: OnceLock<RwLock<Arc<LogFactorials>>> = OnceLock::new();

/// Process-wide table covering at least `0..=n`, grown on demand.
pub fn log_factorials(n: usize) -> Arc<LogFactorials> {
    let lock = SHARED.get_or_init(|| RwLock::new(Arc::new(LogFactorials::new(1024))));
    {
        let current = lock.read().expect("log-factorial table poisoned");
        if current.len() > n {
            return Arc::clone(&current);
        }
    }
    let mut w = lock.write().expect("log-factorial table poisoned");
    if w.len() <= n {
        *w = Arc::new(LogFactorials::new((n + 1).next_power_of_two()));
    }
    Arc::clone(&w)
}

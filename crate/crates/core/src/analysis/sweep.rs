//! Full `m = 0..=N` sweeps of the alpha-averaged probability to cheat.
//!
//! For fixed `m` and `N_R` the probability to reject depends on alpha only
//! through `T = ceil((1 - alpha) N_R) - 1`, so it is piecewise constant with
//! jumps at `alpha = 1 - j/N_R`. The support of the alpha distribution is cut
//! at every such jump of every contributing `N_R`; each piece then contributes
//! `P_ch * mass(piece)`, with the mass from adaptive Gauss-Legendre.
//!
//! Hypergeometric weights are advanced in `m` with the forward recurrence
//! ```text
//! H(n; m+1) = H(n; m) (N - m - N_R + n)/(N - m) + H(n-1; m) (N_R - n + 1)/(N - m)
//! ```
//! and binomial tails come from a table built by
//! `F(n+1, T) = (F(n, T) + F(n, T-1)) / 2`, so one step costs
//! `O(window * T-range)` per split and no transcendental calls.

use serde::{Deserialize, Serialize};

use super::alpha::AlphaDistribution;
use super::fairness::split_weights;
use super::logprob::CompensatedSum;
use super::quadrature::GaussLegendre;
use super::threshold::allowed_wrong;
use super::{invalid, AnalysisError, SplitModel};

/// Splits whose weight `q(N_R)` is below this are skipped.
const MIN_SPLIT_WEIGHT: f64 = 1e-20;
/// Hypergeometric terms below this are dropped from the window.
const FLUSH: f64 = 1e-30;
/// Breakpoints closer than this are merged.
const BREAK_EPS: f64 = 1e-14;
/// Full recomputation interval for the incremental piece sums.
const RESYNC: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl Piece {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone)]
struct Slot {
    n_reject: usize,
    weight: f64,
    t_min: usize,
    t_max: usize,
}

/// Precomputed pieces, split weights and tail table for one `(N, split, p(alpha))`.
#[derive(Debug, Clone)]
pub struct Sweep {
    big_n: usize,
    slots: Vec<Slot>,
    pieces: Vec<Piece>,
    t_first: Vec<usize>,
    /// `changes[k]` lists `(slot, T)` updates entering piece `k`.
    changes: Vec<Vec<(usize, usize)>>,
    tail: Vec<f64>,
    tail_cols: usize,
    mass_error: Option<f64>,
}

impl Sweep {
    pub fn new(
        big_n: usize,
        split: SplitModel,
        dist: &AlphaDistribution,
        quad_tol: f64,
    ) -> Result<Sweep, AnalysisError> {
        if big_n == 0 {
            return Err(invalid("n", "N must be at least 1"));
        }
        if !(quad_tol > 0.0) || !quad_tol.is_finite() {
            return Err(invalid("quad_tol", format!("{quad_tol} must be positive")));
        }
        dist.validate()?;
        let mut slots: Vec<Slot> = split_weights(big_n, split)?
            .into_iter()
            .filter(|(_, lq)| *lq >= MIN_SPLIT_WEIGHT.ln())
            .map(|(n_reject, lq)| Slot {
                n_reject,
                weight: lq.exp(),
                t_min: usize::MAX,
                t_max: 0,
            })
            .collect();

        let (lo, hi) = dist.support();
        let (pieces, groups, mass_error) = if dist.is_point() {
            (vec![Piece { lo, hi, mass: 1.0 }], Vec::new(), None)
        } else {
            build_pieces(&slots, dist, quad_tol)?
        };

        let t_at = |slot: &Slot, piece: &Piece| allowed_wrong(piece.mid(), slot.n_reject);
        let t_first: Vec<usize> = slots.iter().map(|s| t_at(s, &pieces[0])).collect();
        let mut changes = vec![Vec::new()];
        for (k, group) in groups.iter().enumerate() {
            let piece = &pieces[k + 1];
            changes.push(group.iter().map(|&s| (s, t_at(&slots[s], piece))).collect());
        }
        for (s, slot) in slots.iter_mut().enumerate() {
            slot.t_min = t_first[s];
            slot.t_max = t_first[s];
        }
        for list in &changes {
            for &(s, t) in list {
                slots[s].t_min = slots[s].t_min.min(t);
                slots[s].t_max = slots[s].t_max.max(t);
            }
        }

        let rows = slots.iter().map(|s| s.n_reject).max().unwrap_or(0) + 1;
        let tail_cols = slots.iter().map(|s| s.t_max).max().unwrap_or(0) + 1;
        let tail = tail_table(rows, tail_cols);
        Ok(Sweep {
            big_n,
            slots,
            pieces,
            t_first,
            changes,
            tail,
            tail_cols,
            mass_error,
        })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Summed error bound of pieces whose mass integral did not converge.
    pub fn mass_error(&self) -> Option<f64> {
        self.mass_error
    }

    /// Calls `visit(m, p_reject)` for each `m` in `m_lo..=m_hi`, where
    /// `p_reject[k]` is the split-averaged probability to reject on piece `k`.
    pub fn run<F: FnMut(usize, &[f64])>(&self, m_lo: usize, m_hi: usize, mut visit: F) {
        let big_n = self.big_n;
        let m_hi = m_hi.min(big_n);
        let mut hyper: Vec<Window> = self.slots.iter().map(|s| Window::new(s.n_reject)).collect();
        let mut g: Vec<Vec<f64>> = self
            .slots
            .iter()
            .map(|s| vec![0.0; s.t_max + 1 - s.t_min])
            .collect();
        let mut out = vec![0.0; self.pieces.len()];
        for m in 0..=m_hi {
            if m > 0 {
                for (w, s) in hyper.iter_mut().zip(&self.slots) {
                    w.advance(m - 1, s.n_reject, big_n);
                }
            }
            if m < m_lo {
                continue;
            }
            for ((w, s), gs) in hyper.iter().zip(&self.slots).zip(g.iter_mut()) {
                self.fill_tails(w, s, m, gs);
            }
            self.piece_rejects(&g, &mut out);
            visit(m, &out);
        }
    }

    /// `g[T - t_min] = 1 - sum_n H(n) F(n, T)` over the slot's T range, the
    /// probability of being unable to reject. Working with the complement
    /// keeps `P_R = 1` exact where rejection is certain.
    fn fill_tails(&self, w: &Window, s: &Slot, m: usize, g: &mut [f64]) {
        g.fill(0.0);
        let cols = self.tail_cols;
        for n in w.lo..=w.hi {
            let h = w.h[n];
            if h == 0.0 {
                continue;
            }
            let row = &self.tail[n * cols + s.t_min..n * cols + s.t_max + 1];
            for (gi, fi) in g.iter_mut().zip(row) {
                *gi += h * fi;
            }
        }
        for (i, gi) in g.iter_mut().enumerate() {
            // Fewer than (1 - alpha) N_R qubits measured: rejection is certain.
            if s.t_min + i >= m {
                *gi = 0.0;
            } else {
                *gi = (1.0 - *gi).max(0.0);
            }
        }
    }

    fn piece_rejects(&self, g: &[Vec<f64>], out: &mut [f64]) {
        let full = |t: &[usize]| -> f64 {
            let mut acc = CompensatedSum::default();
            for ((s, gs), &ti) in self.slots.iter().zip(g).zip(t) {
                acc.add(s.weight * gs[ti - s.t_min]);
            }
            acc.value()
        };
        let mut t = self.t_first.clone();
        let mut stuck = full(&t);
        out[0] = (1.0 - stuck).clamp(0.0, 1.0);
        for k in 1..self.pieces.len() {
            if k % RESYNC == 0 {
                for &(s, tn) in &self.changes[k] {
                    t[s] = tn;
                }
                stuck = full(&t);
            } else {
                for &(s, tn) in &self.changes[k] {
                    let slot = &self.slots[s];
                    stuck += slot.weight * (g[s][tn - slot.t_min] - g[s][t[s] - slot.t_min]);
                    t[s] = tn;
                }
            }
            out[k] = (1.0 - stuck).clamp(0.0, 1.0);
        }
    }

    /// `sum_k mass_k * P_R,k (1 - P_R,k)`.
    pub fn expected_cheat(&self, p_reject: &[f64]) -> f64 {
        let mut acc = CompensatedSum::default();
        for (piece, pr) in self.pieces.iter().zip(p_reject) {
            acc.add(piece.mass * pr * (1.0 - pr));
        }
        acc.value().clamp(0.0, 0.25)
    }

    fn quad_result(&self, value: f64) -> Result<f64, AnalysisError> {
        match self.mass_error {
            None => Ok(value),
            Some(err) => Err(AnalysisError::QuadratureNotConverged {
                estimate: value,
                error_bound: 0.25 * err,
            }),
        }
    }
}

type Built = (Vec<Piece>, Vec<Vec<usize>>, Option<f64>);

fn build_pieces(
    slots: &[Slot],
    dist: &AlphaDistribution,
    quad_tol: f64,
) -> Result<Built, AnalysisError> {
    let (lo, hi) = dist.support();
    let mut events: Vec<(f64, usize)> = Vec::new();
    for (s, slot) in slots.iter().enumerate() {
        let nr = slot.n_reject as f64;
        if slot.n_reject == 0 {
            continue;
        }
        let j_lo = ((1.0 - hi) * nr).floor() as i64;
        let j_hi = ((1.0 - lo) * nr).ceil() as i64;
        for j in j_lo.max(0)..=j_hi {
            let a = 1.0 - j as f64 / nr;
            if a > lo + BREAK_EPS && a < hi - BREAK_EPS {
                events.push((a, s));
            }
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut cuts: Vec<f64> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (a, s) in events {
        match cuts.last() {
            Some(&c) if a - c <= BREAK_EPS => groups.last_mut().expect("group").push(s),
            _ => {
                cuts.push(a);
                groups.push(vec![s]);
            }
        }
    }
    // Density kinks only need a cut, not a threshold change.
    for knot in dist.interior_knots() {
        if knot <= lo + BREAK_EPS || knot >= hi - BREAK_EPS {
            continue;
        }
        let i = cuts.partition_point(|c| *c < knot - BREAK_EPS);
        if i < cuts.len() && (cuts[i] - knot).abs() <= BREAK_EPS {
            continue;
        }
        cuts.insert(i, knot);
        groups.insert(i, Vec::new());
    }

    let gl = GaussLegendre::default();
    let width = hi - lo;
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend_from_slice(&cuts);
    edges.push(hi);
    let mut pieces = Vec::with_capacity(edges.len() - 1);
    let mut err: Option<f64> = None;
    for e in edges.windows(2) {
        let tol = quad_tol * (e[1] - e[0]) / width;
        let mass = match gl.integrate(|a| dist.density(a), e[0], e[1], tol) {
            Ok(v) => v,
            Err(f) => {
                *err.get_or_insert(0.0) += f.error_bound;
                f.estimate
            }
        };
        pieces.push(Piece {
            lo: e[0],
            hi: e[1],
            mass,
        });
    }
    Ok((pieces, groups, err))
}

/// Row-major `F(n, T) = 2^-n sum_{i<=T} C(n, i)` for `n < rows`, `T < cols`.
fn tail_table(rows: usize, cols: usize) -> Vec<f64> {
    let mut f = vec![0.0; rows * cols];
    f[..cols].fill(1.0);
    for n in 1..rows {
        let (prev, cur) = f.split_at_mut(n * cols);
        let prev = &prev[(n - 1) * cols..];
        let cur = &mut cur[..cols];
        for t in 0..cols {
            let v = if t >= n {
                1.0
            } else if t == 0 {
                0.5 * prev[0]
            } else {
                0.5 * (prev[t] + prev[t - 1])
            };
            cur[t] = if v < 1e-300 { 0.0 } else { v };
        }
    }
    f
}

/// Non-negligible band of the hypergeometric pmf in `n`.
#[derive(Debug, Clone)]
struct Window {
    h: Vec<f64>,
    lo: usize,
    hi: usize,
}

impl Window {
    fn new(n_reject: usize) -> Window {
        let mut h = vec![0.0; n_reject + 1];
        h[0] = 1.0;
        Window { h, lo: 0, hi: 0 }
    }

    /// `H(.; m) -> H(.; m + 1)`.
    fn advance(&mut self, m: usize, n_reject: usize, big_n: usize) {
        let denom = (big_n - m) as f64;
        let new_hi = (self.hi + 1).min(n_reject);
        for n in (self.lo..=new_hi).rev() {
            let stay = if n <= self.hi {
                // Non-negative whenever H(n; m) > 0.
                let free = (big_n - m + n) as f64 - n_reject as f64;
                self.h[n] * free.max(0.0) / denom
            } else {
                0.0
            };
            let come = if n > self.lo {
                self.h[n - 1] * (n_reject - n + 1) as f64 / denom
            } else {
                0.0
            };
            self.h[n] = stay + come;
        }
        self.hi = new_hi;
        while self.lo < self.hi && self.h[self.lo] < FLUSH {
            self.h[self.lo] = 0.0;
            self.lo += 1;
        }
        while self.hi > self.lo && self.h[self.hi] < FLUSH {
            self.h[self.hi] = 0.0;
            self.hi -= 1;
        }
    }
}

/// Expected probability to cheat over a full `m` sweep, with its supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessCurve {
    pub n: usize,
    pub split: SplitModel,
    pub alpha_dist: AlphaDistribution,
    pub quad_tol: f64,
    pub values: Vec<f64>,
    pub sup_m: usize,
    pub sup_value: f64,
}

impl FairnessCurve {
    pub fn sup(&self) -> (usize, f64) {
        (self.sup_m, self.sup_value)
    }
}

/// Argmax with the smallest index on ties.
pub fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (m, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (m, v);
        }
    }
    best
}

/// `integral p(alpha) P_ch(m; alpha) d alpha`.
pub fn expected_prob_cheat(
    m: usize,
    big_n: usize,
    dist: &AlphaDistribution,
    split: SplitModel,
    quad_tol: f64,
) -> Result<f64, AnalysisError> {
    if m > big_n {
        return Err(invalid("m", format!("{m} exceeds N = {big_n}")));
    }
    let sweep = Sweep::new(big_n, split, dist, quad_tol)?;
    let mut value = 0.0;
    sweep.run(m, m, |_, pr| value = sweep.expected_cheat(pr));
    sweep.quad_result(value)
}

/// Sweeps `m = 0..=N` and returns the whole curve with its supremum.
pub fn sup_expected_cheat(
    big_n: usize,
    dist: &AlphaDistribution,
    split: SplitModel,
    quad_tol: f64,
) -> Result<FairnessCurve, AnalysisError> {
    let sweep = Sweep::new(big_n, split, dist, quad_tol)?;
    let mut values = Vec::with_capacity(big_n + 1);
    sweep.run(0, big_n, |_, pr| values.push(sweep.expected_cheat(pr)));
    let (sup_m, sup_value) = argmax(&values);
    sweep.quad_result(sup_value)?;
    Ok(FairnessCurve {
        n: big_n,
        split,
        alpha_dist: dist.clone(),
        quad_tol,
        values,
        sup_m,
        sup_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fairness::{prob_cheat, prob_reject_avg};

    #[test]
    fn tail_table_matches_binomial_sums() {
        let f = tail_table(11, 6);
        assert!((f[10 * 6 + 3] - 176.0 / 1024.0).abs() < 1e-15);
        assert_eq!(f[4 * 6 + 5], 1.0);
        assert_eq!(f[3 * 6], 0.125);
    }

    #[test]
    fn piece_rejects_match_pointwise() {
        for (n, split) in [
            (30, SplitModel::Binomial),
            (40, SplitModel::FixedEqual),
            (7, SplitModel::Binomial),
        ] {
            let dist = AlphaDistribution::uniform(0.56, 0.97).unwrap();
            let sweep = Sweep::new(n, split, &dist, 1e-9).unwrap();
            let total: f64 = sweep.pieces().iter().map(|p| p.mass).sum();
            assert!((total - 1.0).abs() < 1e-12);
            sweep.run(0, n, |m, pr| {
                for (piece, got) in sweep.pieces().iter().zip(pr) {
                    let want = prob_reject_avg(m, piece.mid(), n, split).unwrap().prob();
                    assert!(
                        (got - want).abs() < 1e-12,
                        "n={n} m={m} a={}: {got} vs {want}",
                        piece.mid()
                    );
                }
            });
        }
    }

    #[test]
    fn point_mass_equals_prob_cheat() {
        let dist = AlphaDistribution::point(0.9).unwrap();
        for m in [0, 1, 5, 13, 40] {
            let v = expected_prob_cheat(m, 40, &dist, SplitModel::Binomial, 1e-5).unwrap();
            let want = prob_cheat(m, 0.9, 40, SplitModel::Binomial).unwrap().prob();
            assert!((v - want).abs() < 1e-13);
        }
    }

    #[test]
    fn riemann_sum_agrees() {
        let dist = AlphaDistribution::uniform(0.6, 0.95).unwrap();
        let n = 24;
        let got = expected_prob_cheat(9, n, &dist, SplitModel::Binomial, 1e-8).unwrap();
        let k = 20_000;
        let riemann: f64 = (0..k)
            .map(|i| {
                let a = 0.6 + 0.35 * (i as f64 + 0.5) / k as f64;
                prob_cheat(9, a, n, SplitModel::Binomial).unwrap().prob()
            })
            .sum::<f64>()
            / k as f64;
        assert!((got - riemann).abs() < 1e-4, "{got} vs {riemann}");
    }

    #[test]
    fn tabulated_density_is_integrated() {
        // Triangular density on [0.6, 0.9] peaking at 0.75.
        let dist = AlphaDistribution::tabulated(vec![0.6, 0.75, 0.9], vec![0.0, 1.0, 0.0]).unwrap();
        let sweep = Sweep::new(20, SplitModel::Binomial, &dist, 1e-10).unwrap();
        let total: f64 = sweep.pieces().iter().map(|p| p.mass).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(sweep.pieces().iter().any(|p| (p.hi - 0.75).abs() < 1e-15));
    }

    #[test]
    fn small_curve_shape() {
        let c = sup_expected_cheat(
            2,
            &AlphaDistribution::point(0.9).unwrap(),
            SplitModel::Binomial,
            1e-5,
        )
        .unwrap();
        assert_eq!(c.values.len(), 3);
        assert!(c.values.iter().all(|v| (0.0..=0.25).contains(v)));
        assert_eq!(c.values[0], 0.0);
        assert_eq!(c.sup(), argmax(&c.values));
    }

    #[test]
    fn argmax_prefers_smallest_index() {
        assert_eq!(argmax(&[0.0, 0.2, 0.2, 0.1]), (1, 0.2));
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = AlphaDistribution::default();
        assert!(Sweep::new(0, SplitModel::Binomial, &d, 1e-5).is_err());
        assert!(Sweep::new(10, SplitModel::Binomial, &d, 0.0).is_err());
        assert_eq!(
            sup_expected_cheat(9, &d, SplitModel::FixedEqual, 1e-5).unwrap_err(),
            AnalysisError::OddFixedSplit(9)
        );
        assert!(expected_prob_cheat(11, 10, &d, SplitModel::Binomial, 1e-5).is_err());
    }
}

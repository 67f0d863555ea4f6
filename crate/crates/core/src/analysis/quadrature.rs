//! Adaptive composite Gauss-Legendre quadrature.
//!
//! The interval is split into `2^level` equal panels, each integrated with a
//! fixed-order Gauss-Legendre rule. The panel count doubles until two
//! successive estimates agree to within the tolerance.

use super::logprob::CompensatedSum;

/// Points per panel.
pub const PANEL_ORDER: usize = 8;
/// Maximum number of doublings before giving up.
pub const MAX_DOUBLINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureFailure {
    pub estimate: f64,
    pub error_bound: f64,
    pub doublings: u32,
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for GaussLegendre {
    fn default() -> Self {
        GaussLegendre::new(PANEL_ORDER)
    }
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        GaussLegendre { nodes, weights }
    }

    pub fn composite<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = CompensatedSum::default();
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc.add(w * f(mid + 0.5 * h * x));
            }
        }
        0.5 * h * acc.value()
    }

    /// Integrates `f` over `[a, b]`, doubling panels until successive
    /// estimates differ by less than `tol`.
    pub fn integrate<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        tol: f64,
    ) -> Result<f64, QuadratureFailure> {
        if a == b {
            return Ok(0.0);
        }
        let mut prev = self.composite(&mut f, a, b, 1);
        let mut diff = f64::INFINITY;
        for level in 1..=MAX_DOUBLINGS {
            let cur = self.composite(&mut f, a, b, 1 << level);
            diff = (cur - prev).abs();
            if diff < tol {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(QuadratureFailure {
            estimate: prev,
            error_bound: diff,
            doublings: MAX_DOUBLINGS,
        })
    }
}

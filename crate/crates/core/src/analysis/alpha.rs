//! Publicly known distributions of the acceptance ratio alpha.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Distribution of the acceptance ratio, supported inside `(1/2, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaDistribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    PointMass {
        alpha: f64,
    },
    /// Piecewise-linear density through `(nodes[i], weights[i])`,
    /// normalized to unit mass by [`AlphaDistribution::tabulated`].
    Tabulated {
        nodes: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl Default for AlphaDistribution {
    fn default() -> Self {
        AlphaDistribution::Uniform { lo: 0.9, hi: 0.99 }
    }
}

fn in_open_support(a: f64) -> bool {
    a > 0.5 && a < 1.0
}

impl AlphaDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, AnalysisError> {
        let d = AlphaDistribution::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn point(alpha: f64) -> Result<Self, AnalysisError> {
        let d = AlphaDistribution::PointMass { alpha };
        d.validate()?;
        Ok(d)
    }

    /// Builds a tabulated density and rescales the weights to unit mass.
    pub fn tabulated(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self, AnalysisError> {
        let raw = AlphaDistribution::Tabulated {
            nodes: nodes.clone(),
            weights: weights.clone(),
        };
        raw.validate_shape()?;
        let mass: f64 = nodes
            .windows(2)
            .zip(weights.windows(2))
            .map(|(x, w)| 0.5 * (x[1] - x[0]) * (w[0] + w[1]))
            .sum();
        let weights = weights.iter().map(|w| w / mass).collect();
        Ok(AlphaDistribution::Tabulated { nodes, weights })
    }

    fn validate_shape(&self) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::InvalidAlphaDistribution(msg));
        match self {
            AlphaDistribution::Uniform { lo, hi } => {
                if !(in_open_support(*lo) && in_open_support(*hi) && lo < hi) {
                    return bad(format!(
                        "uniform support [{lo}, {hi}] must satisfy 1/2 < lo < hi < 1"
                    ));
                }
            }
            AlphaDistribution::PointMass { alpha } => {
                if !in_open_support(*alpha) {
                    return bad(format!("point mass {alpha} outside (1/2, 1)"));
                }
            }
            AlphaDistribution::Tabulated { nodes, weights } => {
                if nodes.len() < 2 || nodes.len() != weights.len() {
                    return bad("tabulated density needs >= 2 nodes and one weight per node".into());
                }
                if !nodes.iter().all(|a| in_open_support(*a)) {
                    return bad("tabulated nodes must lie in (1/2, 1)".into());
                }
                if nodes.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("tabulated nodes must be strictly increasing".into());
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return bad("tabulated weights must be finite and non-negative".into());
                }
                if weights.iter().all(|w| *w == 0.0) {
                    return bad("tabulated weights are all zero".into());
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        self.validate_shape()?;
        if let AlphaDistribution::Tabulated { .. } = self {
            let mass = self.cdf(self.support().1);
            if (mass - 1.0).abs() > 1e-9 {
                return Err(AnalysisError::InvalidAlphaDistribution(format!(
                    "tabulated density integrates to {mass}, expected 1"
                )));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            AlphaDistribution::Uniform { lo, hi } => (*lo, *hi),
            AlphaDistribution::PointMass { alpha } => (*alpha, *alpha),
            AlphaDistribution::Tabulated { nodes, .. } => (nodes[0], nodes[nodes.len() - 1]),
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, AlphaDistribution::PointMass { .. })
    }

    /// Points inside the support where the density has a kink.
    pub fn interior_knots(&self) -> Vec<f64> {
        match self {
            AlphaDistribution::Tabulated { nodes, .. } => nodes[1..nodes.len() - 1].to_vec(),
            _ => Vec::new(),
        }
    }

    /// Density at `a`; zero outside the support. Undefined for a point mass.
    pub fn density(&self, a: f64) -> f64 {
        match self {
            AlphaDistribution::Uniform { lo, hi } => {
                if a >= *lo && a <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            AlphaDistribution::PointMass { .. } => 0.0,
            AlphaDistribution::Tabulated { nodes, weights } => {
                if a < nodes[0] || a > nodes[nodes.len() - 1] {
                    return 0.0;
                }
                let i = match nodes.partition_point(|x| *x <= a) {
                    0 => 0,
                    i if i >= nodes.len() => nodes.len() - 2,
                    i => i - 1,
                };
                let t = (a - nodes[i]) / (nodes[i + 1] - nodes[i]);
                weights[i] + t * (weights[i + 1] - weights[i])
            }
        }
    }

    pub fn cdf(&self, a: f64) -> f64 {
        match self {
            AlphaDistribution::Uniform { lo, hi } => ((a - lo) / (hi - lo)).clamp(0.0, 1.0),
            AlphaDistribution::PointMass { alpha } => {
                if a >= *alpha {
                    1.0
                } else {
                    0.0
                }
            }
            AlphaDistribution::Tabulated { nodes, weights } => {
                let mut acc = 0.0;
                for i in 0..nodes.len() - 1 {
                    let (x0, x1) = (nodes[i], nodes[i + 1]);
                    if a <= x0 {
                        break;
                    }
                    let x = a.min(x1);
                    let w = self.density(x);
                    acc += 0.5 * (x - x0) * (weights[i] + w);
                }
                acc.clamp(0.0, 1.0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            AlphaDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            AlphaDistribution::PointMass { alpha } => *alpha,
            AlphaDistribution::Tabulated { nodes, weights } => nodes
                .windows(2)
                .zip(weights.windows(2))
                .map(|(x, w)| {
                    // exact integral of x * (linear density) over the segment
                    let h = x[1] - x[0];
                    h * (w[0] * (2.0 * x[0] + x[1]) + w[1] * (x[0] + 2.0 * x[1])) / 6.0
                })
                .sum(),
        }
    }

    /// Draws one alpha by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AlphaDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            AlphaDistribution::PointMass { alpha } => *alpha,
            AlphaDistribution::Tabulated { nodes, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for i in 0..nodes.len() - 1 {
                    let h = nodes[i + 1] - nodes[i];
                    let seg = 0.5 * h * (weights[i] + weights[i + 1]);
                    if u <= acc + seg || i == nodes.len() - 2 {
                        // solve w0 t + (w1 - w0) t^2 / (2h) = r for t in [0, h]
                        let r = (u - acc).max(0.0);
                        let (w0, w1) = (weights[i], weights[i + 1]);
                        let a = (w1 - w0) / (2.0 * h);
                        let t = if a.abs() < 1e-300 {
                            if w0 > 0.0 {
                                r / w0
                            } else {
                                0.0
                            }
                        } else {
                            (-w0 + (w0 * w0 + 4.0 * a * r).max(0.0).sqrt()) / (2.0 * a)
                        };
                        return (nodes[i] + t.clamp(0.0, h))
                            .clamp(nodes[0], nodes[nodes.len() - 1]);
                    }
                    acc += seg;
                }
                nodes[nodes.len() - 1]
            }
        }
    }
}

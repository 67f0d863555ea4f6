//! Power-law fit of the supremum of the expected probability to cheat.

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Exponent `b` of `sup = c N^b`.
    pub slope: f64,
    /// `ln c`.
    pub intercept: f64,
    pub prefactor: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual_norm: f64,
    pub points: Vec<(usize, f64)>,
}

/// Ordinary least squares of `ln(sup)` against `ln(N)`.
pub fn scaling_fit(points: &[(usize, f64)]) -> Result<ScalingFit, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::TooFewPoints(points.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &(n, v) in points {
        if n == 0 || !(v > 0.0) || !v.is_finite() {
            return Err(AnalysisError::NonPositivePoint { n, value: v });
        }
        if !seen.insert(n) {
            return Err(AnalysisError::DuplicateN(n));
        }
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_norm = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ScalingFit {
        slope,
        intercept,
        prefactor: intercept.exp(),
        residual_norm,
        points: points.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [100, 200, 400, 800, 1600]
            .iter()
            .map(|&n| (n, 1.7 / (n as f64).sqrt()))
            .collect();
        let fit = scaling_fit(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
        assert!((fit.prefactor - 1.7).abs() < 1e-9);
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            scaling_fit(&[(1, 0.1), (2, 0.1)]),
            Err(AnalysisError::TooFewPoints(2))
        );
        assert_eq!(
            scaling_fit(&[(100, 0.1), (200, 0.05), (100, 0.1)]),
            Err(AnalysisError::DuplicateN(100))
        );
        assert!(scaling_fit(&[(100, 0.1), (200, 0.0), (400, 0.1)]).is_err());
    }
}

//! Classical deterministic weighting methods.

use crate::alternatives::PerformanceMatrix;
use crate::composition::{closure, Composition};
use crate::error::{Error, Result};

const RECIPROCAL_TOL: f64 = 1e-6;

/// AHP weights by the row geometric mean method.
pub fn ahp_gmm(pcm: &[Vec<f64>]) -> Result<Composition> {
    let n = pcm.len();
    if n < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: n });
    }
    for (i, row) in pcm.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        if let Some(j) = row.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositiveEntry { index: i * n + j, value: row[j] });
        }
    }
    for i in 0..n {
        for j in i..n {
            if (pcm[i][j] * pcm[j][i] - 1.0).abs() > RECIPROCAL_TOL {
                return Err(Error::NonReciprocal { row: i, col: j });
            }
        }
    }
    let means: Vec<f64> = pcm.iter().map(|row| (row.iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp()).collect();
    closure(&means)
}

/// BWM weights for fully consistent best-to-others and others-to-worst
/// vectors, where the closed form `closure(others_to_worst)` holds.
pub fn bwm_consistent_weights(best_to_others: &[f64], others_to_worst: &[f64]) -> Result<Composition> {
    if best_to_others.len() != others_to_worst.len() {
        return Err(Error::DimensionMismatch { expected: best_to_others.len(), got: others_to_worst.len() });
    }
    let inverse: Vec<f64> = best_to_others.iter().map(|v| 1.0 / v).collect();
    let from_best = closure(&inverse)?;
    let from_worst = closure(others_to_worst)?;
    if from_best.values().iter().zip(from_worst.values()).any(|(a, b)| (a - b).abs() > RECIPROCAL_TOL) {
        return Err(Error::InconsistentInput);
    }
    Ok(from_worst)
}

/// Weighted-sum utility of every alternative.
pub fn deterministic_wsm(perf: &PerformanceMatrix, w: &[f64]) -> Result<Vec<f64>> {
    perf.values().iter().map(|a| crate::alternatives::aggregate_wsm(a, w)).collect()
}

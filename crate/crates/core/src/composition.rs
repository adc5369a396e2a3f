//! Compositions (positive vectors on the unit simplex) and the centered
//! log-ratio transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-sum invariant of a [`Composition`] and on the
/// zero-sum invariant of a [`ClrVector`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Tolerance used by transform round-trip checks.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-10;

/// A vector of strictly positive entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Composition(Vec<f64>);

impl Composition {
    /// Wraps `values` after checking positivity and the unit sum.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::DimensionTooSmall { min: 2, got: values.len() });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::NonPositiveEntry { index, value });
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidComposition(format!("entries sum to {sum}")));
        }
        Ok(Self(values))
    }

    /// The uniform composition of dimension `n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::DimensionTooSmall { min: 2, got: n });
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Composition {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Composition::new(values)
    }
}

impl From<Composition> for Vec<f64> {
    fn from(c: Composition) -> Self {
        c.0
    }
}

impl std::ops::Index<usize> for Composition {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Centered log-ratio coordinates of a composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrVector(pub Vec<f64>);

impl ClrVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Divides a positive vector by its sum.
pub fn closure(raw: &[f64]) -> Result<Composition> {
    if raw.len() < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: raw.len() });
    }
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveEntry { index, value });
    }
    let sum: f64 = raw.iter().sum();
    if !sum.is_finite() {
        return Err(Error::Overflow);
    }
    // Inputs already closed to machine precision are returned unchanged, which
    // makes closure exactly idempotent.
    if (sum - 1.0).abs() <= 8.0 * f64::EPSILON {
        return Ok(Composition(raw.to_vec()));
    }
    Ok(Composition(raw.iter().map(|v| v / sum).collect()))
}

/// In-place closure without validation; used on hot paths where the caller
/// guarantees positivity.
pub(crate) fn close_in_place(values: &mut [f64]) {
    let sum: f64 = values.iter().sum();
    if sum != 1.0 {
        values.iter_mut().for_each(|v| *v /= sum);
    }
}

/// `log(w_j / g(w))` where `g` is the geometric mean.
pub fn clr(w: &Composition) -> ClrVector {
    ClrVector(clr_slice(w.values()))
}

pub(crate) fn clr_slice(w: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.into_iter().map(|l| l - mean).collect()
}

/// Inverse of [`clr`]. Inputs are centered first, so any constant shift
/// maps to the same composition.
pub fn clr_inverse(v: &ClrVector) -> Result<Composition> {
    clr_inverse_slice(v.values())
}

pub(crate) fn clr_inverse_slice(v: &[f64]) -> Result<Composition> {
    if v.len() < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite log-ratio coordinate".into()));
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let exps: Vec<f64> = v.iter().map(|x| (x - mean).exp()).collect();
    if exps.iter().any(|e| !e.is_finite()) {
        return Err(Error::Overflow);
    }
    if exps.iter().any(|e| *e <= 0.0) {
        return Err(Error::Overflow);
    }
    let sum: f64 = exps.iter().sum();
    if !sum.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(Composition(exps.into_iter().map(|e| e / sum).collect()))
}

//! Elicited preferences of a single decision-maker.

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance of the reciprocity check on point-valued PCM pairs.
pub const RECIPROCITY_TOLERANCE: f64 = 1e-6;

/// A preference entry on the elicitation scale, either certain or uncertain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum UncertainValue {
    Point(f64),
    Uncertain(Uncertainty),
}

/// The uncertain entry kinds. Normal entries may carry optional truncation
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum Uncertainty {
    Normal {
        mean: f64,
        sd: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
    Interval { lo: f64, hi: f64 },
    Triangular { lo: f64, hi: f64 },
}

impl UncertainValue {
    pub fn point(v: f64) -> Self {
        UncertainValue::Point(v)
    }

    pub fn normal(mean: f64, sd: f64) -> Self {
        UncertainValue::Uncertain(Uncertainty::Normal { mean, sd, lo: None, hi: None })
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        UncertainValue::Uncertain(Uncertainty::Interval { lo, hi })
    }

    pub fn triangular(lo: f64, hi: f64) -> Self {
        UncertainValue::Uncertain(Uncertainty::Triangular { lo, hi })
    }

    pub fn as_point(&self) -> Option<f64> {
        match self {
            UncertainValue::Point(v) => Some(*v),
            UncertainValue::Uncertain(_) => None,
        }
    }

    pub fn is_point(&self) -> bool {
        self.as_point().is_some()
    }

    /// Representative value: the point, the normal mean (or the midpoint of
    /// its truncation bounds when the mean lies outside) or the interval
    /// midpoint.
    pub fn center(&self) -> f64 {
        match *self {
            UncertainValue::Point(v) => v,
            UncertainValue::Uncertain(Uncertainty::Normal { mean, lo, hi, .. }) => match (lo, hi) {
                (Some(l), Some(h)) if !(mean > l && mean < h) => 0.5 * (l + h),
                _ => mean,
            },
            UncertainValue::Uncertain(Uncertainty::Interval { lo, hi })
            | UncertainValue::Uncertain(Uncertainty::Triangular { lo, hi }) => 0.5 * (lo + hi),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            UncertainValue::Point(v) if !(v > 0.0 && v.is_finite()) => Err(format!("value {v} is not positive")),
            UncertainValue::Uncertain(Uncertainty::Normal { mean, sd, lo, hi }) => {
                if !(sd > 0.0 && sd.is_finite()) {
                    return Err(format!("standard deviation {sd} is not positive"));
                }
                if !(mean > 0.0 && mean.is_finite()) {
                    return Err(format!("mean {mean} is not positive"));
                }
                match (lo, hi) {
                    (None, None) => {}
                    (Some(l), Some(h)) => {
                        if !(l >= 0.0 && h > l && h.is_finite()) {
                            return Err(format!("invalid truncation bounds [{l}, {h}]"));
                        }
                    }
                    _ => return Err("truncation needs both `lo` and `hi`".into()),
                }
                Ok(())
            }
            UncertainValue::Uncertain(Uncertainty::Interval { lo, hi })
            | UncertainValue::Uncertain(Uncertainty::Triangular { lo, hi }) => {
                if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                    Err(format!("invalid interval [{lo}, {hi}]"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

impl<'de> Deserialize<'de> for UncertainValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
            Tagged(Uncertainty),
        }
        match Raw::deserialize(deserializer)
            .map_err(|_| de::Error::custom("expected a number, a fraction string like \"1/3\", or an object with a `kind`"))?
        {
            Raw::Number(v) => Ok(UncertainValue::Point(v)),
            Raw::Text(s) => parse_fraction(&s).map(UncertainValue::Point).map_err(de::Error::custom),
            Raw::Tagged(u) => Ok(UncertainValue::Uncertain(u)),
        }
    }
}

/// Parses `"3"`, `"0.5"` or `"1/7"`.
fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let bad = || format!("cannot parse `{s}` as a number or fraction");
    match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            Ok(num / den)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

/// Value-vector elicitation methods; all share the same likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ValueMethod {
    PointAllocation,
    Smart,
    Swing,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Full pairwise comparison matrix (AHP). Uncertain entries are read from
    /// the upper triangle; the lower triangle holds their reciprocals.
    Pcm(Vec<Vec<UncertainValue>>),
    /// Best-to-others and others-to-worst vectors (BWM).
    Bwm {
        best: usize,
        worst: usize,
        best_to_others: Vec<UncertainValue>,
        others_to_worst: Vec<UncertainValue>,
    },
    ValueVector { method: ValueMethod, values: Vec<UncertainValue> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceRecord {
    pub id: String,
    pub payload: Payload,
}

impl PreferenceRecord {
    pub fn pcm(id: impl Into<String>, matrix: Vec<Vec<UncertainValue>>) -> Self {
        Self { id: id.into(), payload: Payload::Pcm(matrix) }
    }

    /// Certain PCM from plain numbers.
    pub fn pcm_points(id: impl Into<String>, matrix: &[Vec<f64>]) -> Self {
        Self::pcm(
            id,
            matrix
                .iter()
                .map(|row| row.iter().map(|v| UncertainValue::Point(*v)).collect())
                .collect(),
        )
    }

    pub fn bwm(
        id: impl Into<String>,
        best: usize,
        worst: usize,
        best_to_others: Vec<UncertainValue>,
        others_to_worst: Vec<UncertainValue>,
    ) -> Self {
        Self { id: id.into(), payload: Payload::Bwm { best, worst, best_to_others, others_to_worst } }
    }

    /// Certain BWM record; best and worst are the first entries equal to one
    /// in the respective vectors.
    pub fn bwm_points(id: impl Into<String>, best_to_others: &[f64], others_to_worst: &[f64]) -> Self {
        let best = best_to_others.iter().position(|v| *v == 1.0).unwrap_or(0);
        let worst = others_to_worst.iter().position(|v| *v == 1.0).unwrap_or(0);
        Self::bwm(
            id,
            best,
            worst,
            best_to_others.iter().map(|v| UncertainValue::Point(*v)).collect(),
            others_to_worst.iter().map(|v| UncertainValue::Point(*v)).collect(),
        )
    }

    pub fn value_vector(id: impl Into<String>, method: ValueMethod, values: Vec<UncertainValue>) -> Self {
        Self { id: id.into(), payload: Payload::ValueVector { method, values } }
    }

    pub fn criteria_count(&self) -> usize {
        match &self.payload {
            Payload::Pcm(m) => m.len(),
            Payload::Bwm { best_to_others, .. } => best_to_others.len(),
            Payload::ValueVector { values, .. } => values.len(),
        }
    }

    /// True when some entry that enters the likelihood is uncertain.
    pub fn is_uncertain(&self) -> bool {
        match &self.payload {
            Payload::Pcm(m) => m
                .iter()
                .enumerate()
                .any(|(i, row)| row.iter().skip(i + 1).any(|v| !v.is_point())),
            Payload::Bwm { best_to_others, others_to_worst, .. } => {
                best_to_others.iter().chain(others_to_worst).any(|v| !v.is_point())
            }
            Payload::ValueVector { values, .. } => values.iter().any(|v| !v.is_point()),
        }
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidRecord { id: self.id.clone(), reason: reason.into() }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.criteria_count();
        if n < 2 {
            return Err(self.invalid(format!("at least two criteria are required, got {n}")));
        }
        match &self.payload {
            Payload::Pcm(m) => self.validate_pcm(m),
            Payload::Bwm { best, worst, best_to_others, others_to_worst } => {
                if others_to_worst.len() != n {
                    return Err(self.invalid(format!(
                        "best-to-others has {n} entries but others-to-worst has {}",
                        others_to_worst.len()
                    )));
                }
                if *best >= n || *worst >= n {
                    return Err(self.invalid("best or worst index out of range"));
                }
                if best == worst {
                    return Err(self.invalid("best and worst criteria coincide"));
                }
                if best_to_others[*best] != UncertainValue::Point(1.0) {
                    return Err(self.invalid("the best criterion must compare to itself as exactly 1"));
                }
                if others_to_worst[*worst] != UncertainValue::Point(1.0) {
                    return Err(self.invalid("the worst criterion must compare to itself as exactly 1"));
                }
                for (j, v) in best_to_others.iter().chain(others_to_worst).enumerate() {
                    v.validate().map_err(|e| self.invalid(format!("entry {}: {e}", j % n + 1)))?;
                }
                Ok(())
            }
            Payload::ValueVector { values, .. } => {
                for (j, v) in values.iter().enumerate() {
                    v.validate().map_err(|e| self.invalid(format!("entry {}: {e}", j + 1)))?;
                }
                Ok(())
            }
        }
    }

    fn validate_pcm(&self, m: &[Vec<UncertainValue>]) -> Result<()> {
        let n = m.len();
        for (i, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(self.invalid(format!("row {} has {} entries, expected {n}", i + 1, row.len())));
            }
        }
        for i in 0..n {
            if m[i][i] != UncertainValue::Point(1.0) {
                return Err(self.invalid(format!("diagonal entry ({0}, {0}) must be 1", i + 1)));
            }
            for j in (i + 1)..n {
                let upper = m[i][j];
                let lower = m[j][i];
                upper
                    .validate()
                    .map_err(|_| Error::NonPositivePcmEntry { row: i, col: j })?;
                match (upper, lower) {
                    (UncertainValue::Point(a), UncertainValue::Point(b)) => {
                        if !(b > 0.0) {
                            return Err(Error::NonPositivePcmEntry { row: j, col: i });
                        }
                        if (a * b - 1.0).abs() > RECIPROCITY_TOLERANCE {
                            return Err(self.invalid(format!(
                                "entries ({}, {}) = {a} and ({}, {}) = {b} are not reciprocal",
                                i + 1,
                                j + 1,
                                j + 1,
                                i + 1
                            )));
                        }
                    }
                    (UncertainValue::Point(_), UncertainValue::Uncertain(_)) => {
                        return Err(self.invalid(format!(
                            "uncertain entry ({}, {}) must be given in the upper triangle",
                            j + 1,
                            i + 1
                        )));
                    }
                    // Lower entries of uncertain pairs are ignored.
                    (UncertainValue::Uncertain(_), _) => {}
                }
            }
        }
        Ok(())
    }
}

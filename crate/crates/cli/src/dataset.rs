//! Dataset files: parsing, validation and normalization.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use credal_mcdm::{Error as CoreError, PerformanceMatrix, PreferenceRecord, UncertainValue, ValueMethod};
use nalgebra::DMatrix;
use serde::Deserialize;

pub const SCHEMA_VERSION: &str = "1";

/// A dataset that failed validation; rendered as `path:line: message`.
#[derive(Debug)]
pub struct ValidationError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{line}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ValidationError {}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DatasetFile {
    schema_version: String,
    criteria: Vec<String>,
    decision_makers: Vec<RecordDto>,
    #[serde(default)]
    performance: Option<PerformanceDto>,
    #[serde(default)]
    covariance: Option<CovarianceDto>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RecordDto {
    id: String,
    #[serde(default)]
    pcm: Option<Vec<Vec<UncertainValue>>>,
    #[serde(default)]
    bwm: Option<BwmDto>,
    #[serde(default)]
    value_vector: Option<ValueVectorDto>,
}

/// A criterion named by label or by 1-based position.
#[derive(Deserialize)]
#[serde(untagged)]
enum CriterionRef {
    Index(usize),
    Label(String),
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct BwmDto {
    #[serde(default)]
    best: Option<CriterionRef>,
    #[serde(default)]
    worst: Option<CriterionRef>,
    best_to_others: Vec<UncertainValue>,
    others_to_worst: Vec<UncertainValue>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ValueVectorDto {
    method: ValueMethod,
    values: Vec<UncertainValue>,
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "camelCase")]
pub enum CriterionType {
    Benefit,
    Cost,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PerformanceDto {
    alternatives: Vec<String>,
    values: Vec<Vec<f64>>,
    /// Absent when the values are already normalized.
    #[serde(default)]
    criterion_type: Option<Vec<CriterionType>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CovarianceDto {
    Matrix(Vec<Vec<f64>>),
    Keyword(String),
}

#[derive(Debug, Clone)]
pub enum CovarianceSource {
    Matrix(DMatrix<f64>),
    FromPerformance,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub criteria: Vec<String>,
    pub records: Vec<PreferenceRecord>,
    pub performance: Option<PerformanceMatrix>,
    pub covariance: Option<CovarianceSource>,
}

/// Min-max scaling per column; cost columns are reflected so larger is
/// better. A constant column maps to 1.
pub fn normalize(values: &[Vec<f64>], types: &[CriterionType]) -> Vec<Vec<f64>> {
    let mut out = values.to_vec();
    for (j, kind) in types.iter().enumerate() {
        let column = values.iter().map(|row| row[j]);
        let lo = column.clone().fold(f64::INFINITY, f64::min);
        let hi = column.fold(f64::NEG_INFINITY, f64::max);
        for row in &mut out {
            let scaled = if hi > lo { (row[j] - lo) / (hi - lo) } else { 1.0 };
            row[j] = match kind {
                CriterionType::Benefit => scaled,
                CriterionType::Cost if hi > lo => 1.0 - scaled,
                CriterionType::Cost => 1.0,
            };
        }
    }
    out
}

struct Source<'a> {
    path: String,
    text: &'a str,
}

impl Source<'_> {
    fn error(&self, line: Option<usize>, message: impl Into<String>) -> ValidationError {
        ValidationError { path: self.path.clone(), line, message: message.into() }
    }

    /// First line containing `key` as a JSON object key.
    fn line_of_key(&self, key: &str) -> Option<usize> {
        let needle = format!("\"{key}\"");
        self.text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
    }

    /// Line of the `"id": "<id>"` entry of a decision-maker.
    fn line_of_record(&self, id: &str) -> Option<usize> {
        let quoted = serde_json::to_string(id).ok()?;
        let mut lines = self.text.lines().enumerate();
        lines
            .clone()
            .find(|(_, l)| l.contains("\"id\"") && l.contains(&quoted))
            .or_else(|| lines.find(|(_, l)| l.contains(&quoted)))
            .map(|(i, _)| i + 1)
            .or_else(|| self.line_of_key("decisionMakers"))
    }

    fn record_error(&self, id: &str, message: impl fmt::Display) -> ValidationError {
        self.error(self.line_of_record(id), format!("decision-maker `{id}`: {message}"))
    }
}

fn resolve(reference: &Option<CriterionRef>, criteria: &[String], fallback: Option<usize>) -> Result<usize, String> {
    match reference {
        Some(CriterionRef::Index(i)) if (1..=criteria.len()).contains(i) => Ok(i - 1),
        Some(CriterionRef::Index(i)) => Err(format!("criterion index {i} out of range 1..={}", criteria.len())),
        Some(CriterionRef::Label(l)) => {
            criteria.iter().position(|c| c == l).ok_or_else(|| format!("unknown criterion `{l}`"))
        }
        None => fallback.ok_or_else(|| "no entry equals 1; name the criterion explicitly".to_string()),
    }
}

fn first_unit(values: &[UncertainValue]) -> Option<usize> {
    values.iter().position(|v| *v == UncertainValue::Point(1.0))
}

fn convert_record(dto: RecordDto, criteria: &[String]) -> Result<PreferenceRecord, String> {
    let n = criteria.len();
    let check = |len: usize, what: &str| {
        if len == n {
            Ok(())
        } else {
            Err(format!("{what} has {len} entries but the dataset has {n} criteria"))
        }
    };
    match (dto.pcm, dto.bwm, dto.value_vector) {
        (Some(m), None, None) => {
            check(m.len(), "pcm")?;
            for (i, row) in m.iter().enumerate() {
                check(row.len(), &format!("pcm row {}", i + 1))?;
            }
            Ok(PreferenceRecord::pcm(dto.id, m))
        }
        (None, Some(b), None) => {
            check(b.best_to_others.len(), "bestToOthers")?;
            check(b.others_to_worst.len(), "othersToWorst")?;
            let best = resolve(&b.best, criteria, first_unit(&b.best_to_others)).map_err(|e| format!("best: {e}"))?;
            let worst =
                resolve(&b.worst, criteria, first_unit(&b.others_to_worst)).map_err(|e| format!("worst: {e}"))?;
            Ok(PreferenceRecord::bwm(dto.id, best, worst, b.best_to_others, b.others_to_worst))
        }
        (None, None, Some(v)) => {
            check(v.values.len(), "valueVector")?;
            Ok(PreferenceRecord::value_vector(dto.id, v.method, v.values))
        }
        _ => Err("exactly one of `pcm`, `bwm` or `valueVector` is required".into()),
    }
}

fn check_labels(labels: &[String], what: &str) -> Result<(), String> {
    let mut seen = HashSet::new();
    for l in labels {
        if l.trim().is_empty() {
            return Err(format!("{what} labels must not be empty"));
        }
        if !seen.insert(l.as_str()) {
            return Err(format!("duplicate {what} label `{l}`"));
        }
    }
    Ok(())
}

/// Parses and validates a dataset held in memory; `path` is only used in
/// messages.
pub fn parse(text: &str, path: &str) -> Result<Dataset, ValidationError> {
    let src = Source { path: path.to_string(), text };
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| {
        let line = (e.line() > 0).then_some(e.line());
        let mut message = e.to_string();
        if let Some(i) = message.find(" at line ") {
            message.truncate(i);
        }
        src.error(line, message)
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(src.error(
            src.line_of_key("schemaVersion"),
            format!("unsupported schemaVersion `{}`, expected `{SCHEMA_VERSION}`", file.schema_version),
        ));
    }
    let criteria = file.criteria;
    let line = src.line_of_key("criteria");
    check_labels(&criteria, "criterion").map_err(|e| src.error(line, e))?;
    if criteria.len() < 2 {
        return Err(src.error(line, "at least two criteria are required"));
    }
    if file.decision_makers.is_empty() {
        return Err(src.error(src.line_of_key("decisionMakers"), "no decision-makers"));
    }

    let mut ids = HashSet::new();
    let mut records = Vec::with_capacity(file.decision_makers.len());
    for dto in file.decision_makers {
        let id = dto.id.clone();
        if id.trim().is_empty() {
            return Err(src.error(src.line_of_key("decisionMakers"), "decision-maker ids must not be empty"));
        }
        if !ids.insert(id.clone()) {
            return Err(src.record_error(&id, "duplicate id"));
        }
        let record = convert_record(dto, &criteria).map_err(|e| src.record_error(&id, e))?;
        record.validate().map_err(|e| src.record_error(&id, describe(&e)))?;
        records.push(record);
    }

    let performance = match file.performance {
        None => None,
        Some(p) => {
            let line = src.line_of_key("performance");
            let values = match &p.criterion_type {
                None => p.values,
                Some(types) => {
                    if types.len() != criteria.len() {
                        return Err(src.error(
                            line,
                            format!("criterionType has {} entries, expected {}", types.len(), criteria.len()),
                        ));
                    }
                    if let Some(row) = p.values.iter().find(|r| r.len() != criteria.len()) {
                        return Err(src.error(
                            line,
                            format!("performance row has {} values, expected {}", row.len(), criteria.len()),
                        ));
                    }
                    if p.values.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(src.error(line, "performance values must be finite"));
                    }
                    normalize(&p.values, types)
                }
            };
            check_labels(&p.alternatives, "alternative").map_err(|e| src.error(line, e))?;
            let matrix = PerformanceMatrix::new(p.alternatives, criteria.clone(), values)
                .map_err(|e| src.error(line, format!("performance: {}", describe(&e))))?;
            Some(matrix)
        }
    };

    let covariance = match file.covariance {
        None => None,
        Some(c) => {
            let line = src.line_of_key("covariance");
            Some(match c {
                CovarianceDto::Keyword(k) if k == "fromPerformance" => {
                    if performance.is_none() {
                        return Err(src.error(line, "covariance `fromPerformance` needs a performance block"));
                    }
                    CovarianceSource::FromPerformance
                }
                CovarianceDto::Keyword(k) => {
                    return Err(src.error(line, format!("unknown covariance `{k}`; use a matrix or \"fromPerformance\"")))
                }
                CovarianceDto::Matrix(rows) => {
                    let n = criteria.len();
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(src.error(line, format!("covariance must be {n}×{n}")));
                    }
                    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                    if (0..n).any(|i| (0..n).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12)) {
                        return Err(src.error(line, "covariance must be symmetric"));
                    }
                    CovarianceSource::Matrix(m)
                }
            })
        }
    };

    Ok(Dataset { criteria, records, performance, covariance })
}

fn describe(e: &CoreError) -> String {
    match e {
        CoreError::InvalidRecord { reason, .. } => reason.clone(),
        other => other.to_string(),
    }
}

pub fn load(path: &Path) -> Result<Dataset, ValidationError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ValidationError { path: shown.clone(), line: None, message: format!("cannot read: {e}") })?;
    parse(&text, &shown)
}

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use credal_mcdm::sampler::quantile_sorted;
use credal_mcdm::{PosteriorSamples, SummaryRow};
use serde::Serialize;

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut file = fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
    file.write_all(contents)?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Column names of a samples table: layout parameters, then reported
/// quantities.
fn columns(samples: &PosteriorSamples) -> Vec<String> {
    let mut names = samples.layout().parameter_names();
    for rule in samples.reports() {
        let len = samples.layout().block(&rule.block).map(|b| b.len).unwrap_or(0);
        names.extend((1..=len).map(|i| format!("{}[{i}]", rule.name)));
    }
    names
}

/// One row per draw: chain, iteration (both 1-based), then every column.
/// Numbers use the shortest representation that round-trips, in exponent
/// form when very small or large.
pub fn samples_csv(samples: &PosteriorSamples) -> String {
    let names = columns(samples);
    let dim = samples.dim();
    let mut out = String::from("chain,iteration");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for c in 0..samples.num_chains() {
        for it in 0..samples.iterations() {
            let draw = samples.draw(c, it);
            let _ = write!(out, "{},{}", c + 1, it + 1);
            for v in draw.iter().take(dim) {
                let _ = write!(out, ",{v:?}");
            }
            for rule in samples.reports() {
                let block = samples.layout().block(&rule.block).expect("report blocks exist");
                for v in rule.apply(&draw[block.range()]) {
                    let _ = write!(out, ",{v:?}");
                }
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostics {
    pub max_rhat: Option<f64>,
    pub min_ess: f64,
    pub acceptance_rates: Vec<f64>,
}

pub fn diagnostics(rows: &[SummaryRow], samples: &PosteriorSamples) -> Diagnostics {
    let max_rhat = rows.iter().filter_map(|r| r.rhat).reduce(f64::max);
    let min_ess = rows.iter().map(|r| r.ess).fold(f64::INFINITY, f64::min);
    Diagnostics { max_rhat, min_ess, acceptance_rates: samples.acceptance_rates() }
}

/// Prints a warning for every parameter whose R-hat exceeds 1.05.
pub fn warn_rhat(rows: &[SummaryRow]) {
    let bad: Vec<&SummaryRow> = rows.iter().filter(|r| r.rhat.is_some_and(|v| !(v <= 1.05))).collect();
    if let Some(worst) = bad.iter().max_by(|a, b| a.rhat.unwrap_or(0.0).total_cmp(&b.rhat.unwrap_or(0.0))) {
        eprintln!(
            "warning: {} parameter(s) have R-hat above 1.05 (worst: {} at {:.3}); consider more warmup or draws",
            bad.len(),
            worst.parameter,
            worst.rhat.unwrap_or(f64::NAN)
        );
    }
}

/// Mean, sd and central interval of a set of draws.
#[derive(Serialize)]
pub struct Interval {
    pub mean: f64,
    pub sd: f64,
    #[serde(rename = "q2.5")]
    pub q025: f64,
    pub q50: f64,
    #[serde(rename = "q97.5")]
    pub q975: f64,
}

impl Interval {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            sd: var.sqrt(),
            q025: quantile_sorted(&sorted, 0.025),
            q50: quantile_sorted(&sorted, 0.5),
            q975: quantile_sorted(&sorted, 0.975),
        }
    }
}

//! Per-record likelihood terms, shared by the group and mixture models.
//!
//! Records are compiled against a [`Layout`]: each record gets a weight block,
//! an optional concentration parameter, and one latent scalar per uncertain
//! entry. Evaluation then reads everything from the flat constrained vector.

use log::warn;
use statrs::function::gamma::ln_gamma;

use crate::composition::close_in_place;
use crate::density::{dirichlet_mean_ln_pdf, multinomial_ln_kernel, triangular_ln_pdf, Orientation, ScalarDensity};
use crate::error::{Error, Result};
use crate::preference::{Payload, PreferenceRecord, UncertainValue, Uncertainty};
use crate::transform::{Constraint, Layout};

/// Shape and rate of a gamma prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self { shape: 0.01, rate: 0.01 }
    }
}

impl GammaPrior {
    pub fn validate(&self) -> Result<()> {
        self.density().validate()
    }

    pub(crate) fn density(&self) -> ScalarDensity {
        ScalarDensity::Gamma { shape: self.shape, rate: self.rate }
    }
}

/// Options affecting how records are turned into likelihood terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LikelihoodOptions {
    pub gamma_prior: GammaPrior,
    /// Score uncertain best-to-others vectors against `w` instead of the
    /// closure of `1/w`.
    pub direct_best_to_others: bool,
}

/// Constrained layout plus default initial values, built side by side.
#[derive(Debug, Default)]
pub(crate) struct LayoutBuilder {
    pub layout: Layout,
    pub init: Vec<f64>,
}

impl LayoutBuilder {
    /// Pushes a block and returns the offset of its constrained values.
    pub fn push(&mut self, name: String, constraint: Constraint, init: Vec<f64>) -> Result<usize> {
        let idx = self.layout.push(name, constraint, init.len())?;
        self.init.extend(init);
        Ok(self.layout.blocks()[idx].offset)
    }

    pub fn push_simplex(&mut self, name: String, n: usize) -> Result<usize> {
        self.push(name, Constraint::Simplex, vec![1.0 / n as f64; n])
    }

    pub fn push_positive(&mut self, name: String) -> Result<usize> {
        self.push(name, Constraint::Positive, vec![1.0])
    }
}

#[derive(Debug, Clone, Copy)]
enum Entry {
    Fixed(f64),
    Latent(usize),
    /// Reciprocal of a latent value (lower triangle of an uncertain PCM).
    Reciprocal(usize),
}

impl Entry {
    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Entry::Fixed(v) => v,
            Entry::Latent(o) => x[o],
            Entry::Reciprocal(o) => 1.0 / x[o],
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum LatentPrior {
    Normal { mean: f64, sd: f64 },
    /// Uniform over the block bounds; the constant is dropped.
    Flat,
    Triangular { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Latent {
    offset: usize,
    prior: LatentPrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MeanKind {
    Weights,
    InverseWeights,
}

#[derive(Debug, Clone)]
enum Term {
    Multinomial { counts: Vec<f64>, orientation: Orientation },
    Dirichlet { entries: Vec<Entry>, mean: MeanKind },
    /// Certain PCM: `log_col_sums[i]` is Σ_j log of the normalized column j
    /// at row i, so the n column densities collapse into one O(n) pass.
    AhpFixed { log_col_sums: Vec<f64> },
    AhpLatent { cells: Vec<Entry> },
}

/// One record compiled against a layout.
#[derive(Debug, Clone)]
pub(crate) struct CompiledRecord {
    pub n: usize,
    /// Offset of the record's weight block.
    pub w_offset: usize,
    gamma: Option<usize>,
    terms: Vec<Term>,
    latents: Vec<Latent>,
}

fn integer_counts(values: &[UncertainValue]) -> Option<Vec<f64>> {
    values
        .iter()
        .map(|v| v.as_point().filter(|p| p.fract() == 0.0 && *p >= 0.0))
        .collect()
}

impl CompiledRecord {
    /// Pushes nuisance blocks (concentration, latents) for `record` whose
    /// weight block lives at `w_offset`. `r` is the 1-based record index used
    /// in block names.
    pub fn compile(
        record: &PreferenceRecord,
        r: usize,
        w_offset: usize,
        builder: &mut LayoutBuilder,
        options: &LikelihoodOptions,
    ) -> Result<Self> {
        record.validate()?;
        let n = record.criteria_count();
        let mut latents = Vec::new();
        let mut latent_entry = |builder: &mut LayoutBuilder, name: String, v: &UncertainValue| -> Result<Entry> {
            match v {
                UncertainValue::Point(p) => Ok(Entry::Fixed(*p)),
                UncertainValue::Uncertain(u) => {
                    let (constraint, prior) = match *u {
                        Uncertainty::Normal { mean, sd, lo, hi } => {
                            // validated: either both bounds or none
                            let constraint = match (lo, hi) {
                                (Some(lo), Some(hi)) => Constraint::Bounded { lo, hi },
                                _ => Constraint::Positive,
                            };
                            (constraint, LatentPrior::Normal { mean, sd })
                        }
                        Uncertainty::Interval { lo, hi } => (Constraint::Bounded { lo, hi }, LatentPrior::Flat),
                        Uncertainty::Triangular { lo, hi } => {
                            (Constraint::Bounded { lo, hi }, LatentPrior::Triangular { lo, hi })
                        }
                    };
                    let offset = builder.push(name, constraint, vec![v.center()])?;
                    latents.push(Latent { offset, prior });
                    Ok(Entry::Latent(offset))
                }
            }
        };

        let mut terms = Vec::new();
        let needs_gamma;
        match &record.payload {
            Payload::ValueVector { values, .. } => {
                match integer_counts(values) {
                    Some(counts) if !record.is_uncertain() => {
                        terms.push(Term::Multinomial { counts, orientation: Orientation::Direct });
                        needs_gamma = false;
                    }
                    _ => {
                        if !record.is_uncertain() {
                            warn!("record `{}`: non-integer values, using the Dirichlet likelihood", record.id);
                        }
                        let entries = values
                            .iter()
                            .enumerate()
                            .map(|(j, v)| latent_entry(builder, format!("v[{r}][{}]", j + 1), v))
                            .collect::<Result<Vec<_>>>()?;
                        terms.push(Term::Dirichlet { entries, mean: MeanKind::Weights });
                        needs_gamma = true;
                    }
                }
            }
            Payload::Bwm { best_to_others, others_to_worst, .. } => {
                match (integer_counts(best_to_others), integer_counts(others_to_worst)) {
                    (Some(best), Some(worst)) => {
                        terms.push(Term::Multinomial { counts: worst, orientation: Orientation::Direct });
                        terms.push(Term::Multinomial { counts: best, orientation: Orientation::Inverse });
                        needs_gamma = false;
                    }
                    _ => {
                        if !record.is_uncertain() {
                            warn!("record `{}`: non-integer comparisons, using the Dirichlet likelihood", record.id);
                        }
                        let worst = others_to_worst
                            .iter()
                            .enumerate()
                            .map(|(j, v)| latent_entry(builder, format!("a_worst[{r}][{}]", j + 1), v))
                            .collect::<Result<Vec<_>>>()?;
                        let best = best_to_others
                            .iter()
                            .enumerate()
                            .map(|(j, v)| latent_entry(builder, format!("a_best[{r}][{}]", j + 1), v))
                            .collect::<Result<Vec<_>>>()?;
                        terms.push(Term::Dirichlet { entries: worst, mean: MeanKind::Weights });
                        let mean = if options.direct_best_to_others { MeanKind::Weights } else { MeanKind::InverseWeights };
                        terms.push(Term::Dirichlet { entries: best, mean });
                        needs_gamma = true;
                    }
                }
            }
            Payload::Pcm(m) => {
                needs_gamma = true;
                if record.is_uncertain() {
                    let mut cells = vec![Entry::Fixed(1.0); n * n];
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let e = latent_entry(builder, format!("m[{r}][{},{}]", i + 1, j + 1), &m[i][j])?;
                            cells[i * n + j] = e;
                            cells[j * n + i] = match e {
                                Entry::Fixed(v) => Entry::Fixed(1.0 / v),
                                Entry::Latent(o) => Entry::Reciprocal(o),
                                Entry::Reciprocal(o) => Entry::Latent(o),
                            };
                        }
                    }
                    terms.push(Term::AhpLatent { cells });
                } else {
                    let mut log_col_sums = vec![0.0; n];
                    for j in 0..n {
                        let mut col: Vec<f64> = (0..n).map(|i| m[i][j].as_point().unwrap()).collect();
                        if let Some((row, _)) = col.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                            return Err(Error::NonPositivePcmEntry { row, col: j });
                        }
                        close_in_place(&mut col);
                        for (s, c) in log_col_sums.iter_mut().zip(&col) {
                            *s += c.ln();
                        }
                    }
                    terms.push(Term::AhpFixed { log_col_sums });
                }
            }
        }
        let gamma = if needs_gamma { Some(builder.push_positive(format!("gamma[{r}]"))?) } else { None };
        Ok(Self { n, w_offset, gamma, terms, latents })
    }

    pub fn weights<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.w_offset..self.w_offset + self.n]
    }

    /// Likelihood of the record plus the priors on its own nuisance
    /// parameters (concentration and latent preference values).
    pub fn ln_likelihood(&self, x: &[f64], gamma_prior: &ScalarDensity) -> f64 {
        let w = self.weights(x);
        let gamma = self.gamma.map(|o| x[o]);
        let mut acc = 0.0;
        if let Some(g) = gamma {
            acc += gamma_prior.ln_pdf(g);
        }
        for latent in &self.latents {
            let v = x[latent.offset];
            acc += match latent.prior {
                LatentPrior::Normal { mean, sd } => ScalarDensity::Normal { mean, sd }.ln_pdf(v),
                LatentPrior::Flat => 0.0,
                LatentPrior::Triangular { lo, hi } => triangular_ln_pdf(v, lo, hi),
            };
        }
        if acc == f64::NEG_INFINITY {
            return acc;
        }
        for term in &self.terms {
            acc += match term {
                Term::Multinomial { counts, orientation } => multinomial_ln_kernel(counts, w, *orientation),
                Term::Dirichlet { entries, mean } => {
                    let g = gamma.expect("Dirichlet terms carry a concentration");
                    let mut obs: Vec<f64> = entries.iter().map(|e| e.value(x)).collect();
                    if obs.iter().any(|v| !(*v > 0.0)) {
                        return f64::NEG_INFINITY;
                    }
                    close_in_place(&mut obs);
                    match mean {
                        MeanKind::Weights => dirichlet_mean_ln_pdf(&obs, w, g),
                        MeanKind::InverseWeights => {
                            let mut inv: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
                            close_in_place(&mut inv);
                            dirichlet_mean_ln_pdf(&obs, &inv, g)
                        }
                    }
                }
                Term::AhpFixed { log_col_sums } => {
                    let g = gamma.expect("AHP terms carry a concentration");
                    let n = self.n as f64;
                    let mut v = n * ln_gamma(g);
                    for (wi, s) in w.iter().zip(log_col_sums) {
                        let a = g * wi;
                        v += (a - 1.0) * s - n * ln_gamma(a);
                    }
                    v
                }
                Term::AhpLatent { cells } => {
                    let g = gamma.expect("AHP terms carry a concentration");
                    let n = self.n;
                    let mut col = vec![0.0; n];
                    let mut v = 0.0;
                    for j in 0..n {
                        for (i, c) in col.iter_mut().enumerate() {
                            *c = cells[i * n + j].value(x);
                        }
                        close_in_place(&mut col);
                        v += dirichlet_mean_ln_pdf(&col, w, g);
                    }
                    v
                }
            };
        }
        acc
    }
}

/// Compiles every record, pushing weight blocks `w[r]` first and nuisance
/// blocks afterwards (via `between`, the caller can insert its own blocks).
pub(crate) fn compile_records(
    records: &[PreferenceRecord],
    builder: &mut LayoutBuilder,
    options: &LikelihoodOptions,
    between: impl FnOnce(&mut LayoutBuilder) -> Result<()>,
) -> Result<Vec<CompiledRecord>> {
    let n = check_criteria_count(records)?;
    options.gamma_prior.validate()?;
    let w_offsets = (1..=records.len())
        .map(|r| builder.push_simplex(format!("w[{r}]"), n))
        .collect::<Result<Vec<_>>>()?;
    between(builder)?;
    records
        .iter()
        .zip(w_offsets)
        .enumerate()
        .map(|(i, (rec, off))| CompiledRecord::compile(rec, i + 1, off, builder, options))
        .collect()
}

/// Common criteria count, validating that every record agrees.
pub(crate) fn check_criteria_count(records: &[PreferenceRecord]) -> Result<usize> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    let n = first.criteria_count();
    for r in records {
        if r.criteria_count() != n {
            return Err(Error::MixedCriteriaCount { id: r.id.clone(), expected: n, got: r.criteria_count() });
        }
    }
    if n < 2 {
        return Err(Error::InvalidRecord { id: first.id.clone(), reason: "at least two criteria are required".into() });
    }
    Ok(n)
}

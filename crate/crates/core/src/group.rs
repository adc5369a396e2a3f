//! Hierarchical posterior over individual and aggregated criteria weights.
//!
//! Each decision-maker `r` has weights `w[r]` explained by their own
//! preferences. With more than one record, the individual weights are tied
//! to a group-level `w_star` either through a Dirichlet centered on `w_star`
//! or through a multivariate normal on centered log-ratios.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::composition::clr_slice;
use crate::density::{dirichlet_mean_ln_pdf, MvnKernel, ScalarDensity};
use crate::error::{Error, Result};
use crate::likelihood::{compile_records, CompiledRecord, GammaPrior, LayoutBuilder, LikelihoodOptions};
use crate::model::{ModelSpec, ReportMap, ReportRule};
use crate::preference::PreferenceRecord;
use crate::transform::Constraint;

/// Name of the aggregated weight block (or of its reported simplex image
/// under logistic-normal aggregation).
pub const AGGREGATE: &str = "w_star";
/// CLR-space aggregate block under logistic-normal aggregation.
pub const AGGREGATE_CLR: &str = "w_star_clr";
pub const AGGREGATE_CONCENTRATION: &str = "gamma_star";

/// Name of the weight block of the `r`-th record (1-based).
pub fn weight_block(r: usize) -> String {
    format!("w[{r}]")
}

/// Name of the concentration parameter of the `r`-th record, when it has one.
pub fn concentration_block(r: usize) -> String {
    format!("gamma[{r}]")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Aggregation {
    Dirichlet,
    LogisticNormal {
        covariance: DMatrix<f64>,
        /// Covariance of the prior on the CLR aggregate; `None` means the
        /// identity. Reusing a small aggregation covariance here would pin
        /// the aggregate to the prior mean.
        prior_covariance: Option<DMatrix<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupConfig {
    pub aggregation: Aggregation,
    pub gamma_prior: GammaPrior,
    /// Dirichlet prior on `w_star`; defaults to `1/n` entries.
    pub alpha_prior: Option<Vec<f64>>,
    /// Prior mean of the CLR aggregate; defaults to `1/n` entries.
    pub mu_prior: Option<Vec<f64>>,
    /// Score uncertain best-to-others vectors against `w` instead of the
    /// closure of `1/w`.
    pub direct_best_to_others: bool,
}

impl Default for GroupConfig {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::Dirichlet,
            gamma_prior: GammaPrior::default(),
            alpha_prior: None,
            mu_prior: None,
            direct_best_to_others: false,
        }
    }
}

impl GroupConfig {
    pub fn logistic_normal(covariance: DMatrix<f64>) -> Self {
        Self { aggregation: Aggregation::LogisticNormal { covariance, prior_covariance: None }, ..Self::default() }
    }
}

enum AggregateTerm {
    None,
    Dirichlet { w_star: usize, gamma_star: usize, alpha: Vec<f64>, alpha_sum: f64 },
    LogisticNormal { w_star: usize, mu: Vec<f64>, kernel: MvnKernel, prior: MvnKernel },
}

struct GroupDensity {
    n: usize,
    records: Vec<CompiledRecord>,
    aggregate: AggregateTerm,
    gamma_prior: ScalarDensity,
}

impl GroupDensity {
    fn ln_density(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for rec in &self.records {
            acc += rec.ln_likelihood(x, &self.gamma_prior);
        }
        if acc == f64::NEG_INFINITY {
            return acc;
        }
        let n = self.n;
        match &self.aggregate {
            AggregateTerm::None => {}
            AggregateTerm::Dirichlet { w_star, gamma_star, alpha, alpha_sum } => {
                let ws = &x[*w_star..*w_star + n];
                let gs = x[*gamma_star];
                acc += self.gamma_prior.ln_pdf(gs);
                let mean: Vec<f64> = alpha.iter().map(|a| a / alpha_sum).collect();
                acc += dirichlet_mean_ln_pdf(ws, &mean, *alpha_sum);
                for rec in &self.records {
                    acc += dirichlet_mean_ln_pdf(rec.weights(x), ws, gs);
                }
            }
            AggregateTerm::LogisticNormal { w_star, mu, kernel, prior } => {
                let ws = &x[*w_star..*w_star + n];
                acc += prior.ln_pdf(ws, mu);
                for rec in &self.records {
                    acc += kernel.ln_pdf(&clr_slice(rec.weights(x)), ws);
                }
            }
        }
        acc
    }
}

fn check_square(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.nrows().max(m.ncols()) });
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::InvalidParameter(format!("{what} is not symmetric")));
            }
        }
    }
    Ok(())
}

fn positive_vector(v: Option<&Vec<f64>>, n: usize, what: &str) -> Result<Vec<f64>> {
    match v {
        None => Ok(vec![1.0 / n as f64; n]),
        Some(v) if v.len() != n => Err(Error::DimensionMismatch { expected: n, got: v.len() }),
        Some(v) if v.iter().any(|a| !(*a > 0.0)) => Err(Error::InvalidParameter(format!("{what} must be positive"))),
        Some(v) => Ok(v.clone()),
    }
}

/// Builds the group posterior for `records`. A single record yields the
/// individual model without aggregate terms.
pub fn build_group_posterior(records: &[PreferenceRecord], config: &GroupConfig) -> Result<ModelSpec> {
    let options = LikelihoodOptions { gamma_prior: config.gamma_prior, direct_best_to_others: config.direct_best_to_others };
    let mut builder = LayoutBuilder::default();
    let group = records.len() > 1;
    let mut aggregate = AggregateTerm::None;
    let mut report = None;
    let compiled = compile_records(records, &mut builder, &options, |b| {
        if !group {
            return Ok(());
        }
        let n = records[0].criteria_count();
        match &config.aggregation {
            Aggregation::Dirichlet => {
                let alpha = positive_vector(config.alpha_prior.as_ref(), n, "alpha")?;
                let w_star = b.push_simplex(AGGREGATE.into(), n)?;
                let gamma_star = b.push_positive(AGGREGATE_CONCENTRATION.into())?;
                let alpha_sum = alpha.iter().sum();
                aggregate = AggregateTerm::Dirichlet { w_star, gamma_star, alpha, alpha_sum };
            }
            Aggregation::LogisticNormal { covariance, prior_covariance } => {
                check_square(covariance, n, "covariance")?;
                let identity = DMatrix::identity(n, n);
                let prior_cov = prior_covariance.as_ref().unwrap_or(&identity);
                check_square(prior_cov, n, "prior covariance")?;
                let mu = match &config.mu_prior {
                    None => vec![1.0 / n as f64; n],
                    Some(m) if m.len() != n => return Err(Error::DimensionMismatch { expected: n, got: m.len() }),
                    Some(m) => m.clone(),
                };
                let w_star = b.push(AGGREGATE_CLR.into(), Constraint::Real, mu.clone())?;
                aggregate = AggregateTerm::LogisticNormal {
                    w_star,
                    mu,
                    kernel: MvnKernel::new(covariance)?,
                    prior: MvnKernel::new(prior_cov)?,
                };
                report = Some(ReportRule { name: AGGREGATE.into(), block: AGGREGATE_CLR.into(), map: ReportMap::ClrInverse });
            }
        }
        Ok(())
    })?;
    let density = GroupDensity {
        n: records[0].criteria_count(),
        records: compiled,
        aggregate,
        gamma_prior: config.gamma_prior.density(),
    };
    let mut spec = ModelSpec::new(builder.layout, Arc::new(move |x: &[f64]| density.ln_density(x)), builder.init)?;
    if let Some(rule) = report {
        spec = spec.with_report(rule)?;
    }
    Ok(spec)
}

/// Pearson correlation matrix of the columns of an `m × n` performance
/// matrix. Constant columns are uncorrelated with everything else.
pub fn covariance_from_performance(perf: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = perf.len();
    if m < 2 {
        return Err(Error::TooFewRows(m));
    }
    let n = perf[0].len();
    if let Some(row) = perf.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: row.len() });
    }
    let data = DMatrix::from_fn(m, n, |i, j| perf[i][j]);
    let means: Vec<f64> = (0..n).map(|j| data.column(j).mean()).collect();
    let centered = DMatrix::from_fn(m, n, |i, j| data[(i, j)] - means[j]);
    let cross = centered.transpose() * &centered;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let denom = (cross[(i, i)] * cross[(j, j)]).sqrt();
            if denom > 0.0 {
                (cross[(i, j)] / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        }
    }))
}

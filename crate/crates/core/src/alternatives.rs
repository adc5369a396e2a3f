//! Evaluation, credal ranking and Bayesian sorting of alternatives under
//! distributional criteria weights.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::credal::{credal_ranking, CredalRanking};
use crate::density::dirichlet_mean_ln_pdf;
use crate::error::{Error, Result};
use crate::mixture::{permute_all, relabel_with, responsibilities_with, ComponentNames, MixtureIndex, MAX_RELABEL_CLUSTERS};
use crate::model::ModelSpec;
use crate::sampler::PosteriorSamples;
use crate::transform::{Constraint, Layout};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Alternatives (rows) scored on criteria (columns), normalized to `[0, 1]`
/// with larger meaning better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerformanceMatrix {
    alternatives: Vec<String>,
    criteria: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl PerformanceMatrix {
    pub fn new(alternatives: Vec<String>, criteria: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if alternatives.is_empty() || criteria.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.len() != alternatives.len() {
            return Err(Error::DimensionMismatch { expected: alternatives.len(), got: values.len() });
        }
        for row in &values {
            if row.len() != criteria.len() {
                return Err(Error::DimensionMismatch { expected: criteria.len(), got: row.len() });
            }
            if let Some(v) = row.iter().find(|v| !(-1e-9..=1.0 + 1e-9).contains(*v)) {
                return Err(Error::InvalidParameter(format!("performance value {v} outside [0, 1]")));
            }
        }
        for labels in [&alternatives, &criteria] {
            let mut seen = HashSet::new();
            if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
                return Err(Error::InvalidParameter(format!("duplicate label `{dup}`")));
            }
        }
        Ok(Self { alternatives, criteria, values })
    }

    pub fn alternatives(&self) -> &[String] {
        &self.alternatives
    }

    pub fn criteria(&self) -> &[String] {
        &self.criteria
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }
}

/// Maps a performance row and a weight vector to a utility.
pub trait Aggregator: Send + Sync {
    fn aggregate(&self, a: &[f64], w: &[f64]) -> f64;

    /// Mean utility over weight draws.
    fn expected(&self, a: &[f64], weights: &[Vec<f64>]) -> f64 {
        weights.iter().map(|w| self.aggregate(a, w)).sum::<f64>() / weights.len() as f64
    }

    /// Mean utility over every pair of performance and weight draws.
    fn expected_distributional(&self, performance: &[Vec<f64>], weights: &[Vec<f64>]) -> f64 {
        let total: f64 = performance.iter().map(|a| weights.iter().map(|w| self.aggregate(a, w)).sum::<f64>()).sum();
        total / (performance.len() * weights.len()) as f64
    }
}

/// Weighted sum model.
#[derive(Debug, Clone, Copy, Default)]
pub struct Wsm;

fn column_means(draws: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; draws[0].len()];
    for d in draws {
        for (a, v) in m.iter_mut().zip(d) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|a| *a /= draws.len() as f64);
    m
}

fn dot(a: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(x, y)| x * y).sum()
}

impl Aggregator for Wsm {
    fn aggregate(&self, a: &[f64], w: &[f64]) -> f64 {
        dot(a, w)
    }

    fn expected(&self, a: &[f64], weights: &[Vec<f64>]) -> f64 {
        dot(a, &column_means(weights))
    }

    fn expected_distributional(&self, performance: &[Vec<f64>], weights: &[Vec<f64>]) -> f64 {
        dot(&column_means(performance), &column_means(weights))
    }
}

pub fn aggregate_wsm(a: &[f64], w: &[f64]) -> Result<f64> {
    if a.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: w.len() });
    }
    Ok(dot(a, w))
}

fn check_draws(draws: &[Vec<f64>], n: usize) -> Result<()> {
    if draws.is_empty() {
        return Err(Error::EmptyInput);
    }
    match draws.iter().find(|d| d.len() != n) {
        Some(d) => Err(Error::DimensionMismatch { expected: n, got: d.len() }),
        None => Ok(()),
    }
}

/// Expected utility of every alternative over the weight draws.
pub fn expected_utility(perf: &PerformanceMatrix, weights: &[Vec<f64>], g: &dyn Aggregator) -> Result<Vec<f64>> {
    check_draws(weights, perf.criteria.len())?;
    Ok(perf.values.iter().map(|a| g.expected(a, weights)).collect())
}

/// Expected utility of one alternative whose performance is itself given by
/// draws.
pub fn expected_utility_distributional(
    performance: &[Vec<f64>],
    weights: &[Vec<f64>],
    g: &dyn Aggregator,
) -> Result<f64> {
    let n = performance.first().ok_or(Error::EmptyInput)?.len();
    check_draws(performance, n)?;
    check_draws(weights, n)?;
    Ok(g.expected_distributional(performance, weights))
}

/// Utilities per weight draw: `result[q][i]` is alternative `i` under draw `q`.
pub fn utility_draws(perf: &PerformanceMatrix, weights: &[Vec<f64>], g: &dyn Aggregator) -> Result<Vec<Vec<f64>>> {
    check_draws(weights, perf.criteria.len())?;
    Ok(weights.iter().map(|w| perf.values.iter().map(|a| g.aggregate(a, w)).collect()).collect())
}

/// Credal ranking of the alternatives by utility.
pub fn alternative_credal(perf: &PerformanceMatrix, weights: &[Vec<f64>], g: &dyn Aggregator) -> Result<CredalRanking> {
    credal_ranking(&utility_draws(perf, weights, g)?, &perf.alternatives)
}

pub fn sorting_membership_block(i: usize) -> String {
    format!("theta_hat[{i}]")
}

pub fn sorting_center_block(z: usize) -> String {
    format!("omega_hat[{z}]")
}

const SORTING_NAMES: ComponentNames = ComponentNames {
    data: None,
    theta: sorting_membership_block,
    center: sorting_center_block,
    concentration: None,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SortingConfig {
    pub clusters: usize,
    /// Spread of utilities around their cluster center.
    pub sigma: f64,
    /// Dirichlet prior on each membership vector; defaults to `1/Z` each.
    pub lambda_hat: Option<Vec<f64>>,
    pub mu_hat: f64,
    pub sigma_hat: f64,
}

impl SortingConfig {
    pub fn new(clusters: usize) -> Self {
        Self { clusters, sigma: 1.0, lambda_hat: None, mu_hat: 0.5, sigma_hat: 1.0 }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    fn validate(&self) -> Result<Vec<f64>> {
        if self.clusters == 0 {
            return Err(Error::InvalidConfig("at least one cluster is required".into()));
        }
        for (name, v) in [("sigma", self.sigma), ("sigma_hat", self.sigma_hat)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.mu_hat.is_finite() {
            return Err(Error::InvalidConfig("mu_hat must be finite".into()));
        }
        let z = self.clusters;
        let lambda = self.lambda_hat.clone().unwrap_or_else(|| vec![1.0 / z as f64; z]);
        if lambda.len() != z {
            return Err(Error::DimensionMismatch { expected: z, got: lambda.len() });
        }
        if lambda.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidConfig("lambda_hat entries must be positive".into()));
        }
        Ok(lambda)
    }
}

fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Log-likelihood of one item under a center; with several utility values
/// per item the likelihood is averaged over them.
fn item_ln_likelihood(values: &[f64], center: f64, sigma: f64) -> f64 {
    if let [u] = values {
        return normal_ln_pdf(*u, center, sigma);
    }
    log_mean_exp(values.iter().map(|u| normal_ln_pdf(*u, center, sigma)))
}

fn log_mean_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let (sum, count) = terms.fold((0.0, 0usize), |(s, c), t| (s + (t - max).exp(), c + 1));
    max + (sum / count as f64).ln()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

struct SortingDensity {
    items: Vec<Vec<f64>>,
    sigma: f64,
    mu_hat: f64,
    sigma_hat: f64,
    lambda_mean: Vec<f64>,
    lambda_sum: f64,
    index: MixtureIndex,
}

impl SortingDensity {
    fn ln_density(&self, x: &[f64]) -> f64 {
        let idx = &self.index;
        let z = idx.clusters();
        let centers: Vec<f64> = idx.centers.iter().map(|o| x[*o]).collect();
        let mut acc: f64 = centers.iter().map(|c| normal_ln_pdf(*c, self.mu_hat, self.sigma_hat)).sum();
        let mut terms = vec![0.0; z];
        for (i, values) in self.items.iter().enumerate() {
            if z == 1 {
                acc += item_ln_likelihood(values, centers[0], self.sigma);
                continue;
            }
            let theta = &x[idx.thetas[i]..idx.thetas[i] + z];
            acc += dirichlet_mean_ln_pdf(theta, &self.lambda_mean, self.lambda_sum);
            for (k, t) in terms.iter_mut().enumerate() {
                *t = theta[k].ln() + item_ln_likelihood(values, centers[k], self.sigma);
            }
            acc += log_sum_exp(&terms);
        }
        acc
    }
}

fn build_sorting(items: Vec<Vec<f64>>, config: &SortingConfig) -> Result<ModelSpec> {
    let lambda = config.validate()?;
    let z = config.clusters;
    let m = items.len();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    if z > m {
        return Err(Error::TooManyClusters { clusters: z, items: m });
    }
    if let Some(u) = items.iter().flatten().find(|u| !u.is_finite()) {
        return Err(Error::InvalidParameter(format!("utility {u} is not finite")));
    }
    let mut layout = Layout::new();
    let mut init = Vec::new();
    let mut thetas = Vec::new();
    if z > 1 {
        for i in 1..=m {
            let b = layout.push(sorting_membership_block(i), Constraint::Simplex, z)?;
            thetas.push(layout.blocks()[b].offset);
            init.extend(std::iter::repeat_n(1.0 / z as f64, z));
        }
    }
    // spread initial centers over the observed range so components start apart
    let means: Vec<f64> = items.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min).clamp(0.0, 1.0);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max).clamp(0.0, 1.0);
    let mut centers = Vec::new();
    for k in 1..=z {
        let b = layout.push(sorting_center_block(k), Constraint::Bounded { lo: 0.0, hi: 1.0 }, 1)?;
        centers.push(layout.blocks()[b].offset);
        let t = if z == 1 { 0.5 } else { (z - k) as f64 / (z - 1) as f64 };
        init.push((lo + t * (hi - lo)).clamp(0.01, 0.99));
    }
    let lambda_sum: f64 = lambda.iter().sum();
    let density = SortingDensity {
        items,
        sigma: config.sigma,
        mu_hat: config.mu_hat,
        sigma_hat: config.sigma_hat,
        lambda_mean: lambda.iter().map(|l| l / lambda_sum).collect(),
        lambda_sum,
        index: MixtureIndex { n: 1, weights: Vec::new(), thetas, centers, concentrations: Vec::new() },
    };
    ModelSpec::new(layout, Arc::new(move |x: &[f64]| density.ln_density(x)), init)
}

/// Mixture of normals over alternative utilities with marginalized cluster
/// labels.
pub fn build_sorting_posterior(utilities: &[f64], config: &SortingConfig) -> Result<ModelSpec> {
    build_sorting(utilities.iter().map(|u| vec![*u]).collect(), config)
}

/// Like [`build_sorting_posterior`], but each alternative's likelihood is
/// averaged over its utility draws (`draws[i]` holds the draws of
/// alternative `i`). Thin the draws first: cost grows with their number.
pub fn build_sorting_posterior_from_draws(draws: &[Vec<f64>], config: &SortingConfig) -> Result<ModelSpec> {
    if draws.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput);
    }
    build_sorting(draws.to_vec(), config)
}

/// Sorting draws relabeled so cluster 1 has the highest center, with
/// membership probabilities.
#[derive(Debug, Clone)]
pub struct SortingResult {
    pub samples: PosteriorSamples,
    /// Posterior mean centers, descending.
    pub centers: Vec<f64>,
    /// `m × Z` membership probabilities.
    pub memberships: Vec<Vec<f64>>,
}

impl SortingResult {
    /// `items` and `sigma` must be those the model was built with; a single
    /// value per item for the posterior-mean variant.
    pub fn from_samples(samples: &PosteriorSamples, items: &[Vec<f64>], sigma: f64) -> Result<Self> {
        let idx = MixtureIndex::with_names(samples.layout(), SORTING_NAMES)?;
        let z = idx.clusters();
        if z > 1 && idx.thetas.len() != items.len() {
            return Err(Error::DimensionMismatch { expected: idx.thetas.len(), got: items.len() });
        }
        let mut samples = samples.clone();
        if z > 1 {
            if z > MAX_RELABEL_CLUSTERS {
                return Err(Error::ClusterCountTooLarge(z));
            }
            samples = relabel_with(&samples, &idx)?.0;
            let means: Vec<f64> = (1..=z).map(|k| samples.mean_of(&sorting_center_block(k)).map(|m| m[0])).collect::<Result<_>>()?;
            let mut order: Vec<usize> = (0..z).collect();
            order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
            if order.iter().enumerate().any(|(k, &p)| k != p) {
                samples = permute_all(&samples, &idx, &order)?;
            }
        }
        let centers = (1..=z).map(|k| samples.mean_of(&sorting_center_block(k)).map(|m| m[0])).collect::<Result<_>>()?;
        let memberships = responsibilities_with(&samples, &idx, items.len(), |x, i, k| {
            item_ln_likelihood(&items[i], x[idx.centers[k]], sigma)
        });
        Ok(Self { samples, centers, memberships })
    }

    /// Most probable cluster of each alternative (0-based).
    pub fn assignments(&self) -> Vec<usize> {
        self.memberships
            .iter()
            .map(|row| (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn wsm_examples() {
        let w = [0.083, 0.247, 0.24, 0.323, 0.107];
        assert!((aggregate_wsm(&[0.0, 0.89, 1.0, 1.0, 1.0], &w).unwrap() - 0.889).abs() < 1e-3);
        assert!((aggregate_wsm(&[0.68, 1.0, 0.67, 0.0, 1.0], &w).unwrap() - 0.571).abs() < 1e-3);
        assert_eq!(aggregate_wsm(&[0.0; 5], &w).unwrap(), 0.0);
        assert_eq!(aggregate_wsm(&[0.0; 4], &w).unwrap_err(), Error::DimensionMismatch { expected: 4, got: 5 });
    }

    #[test]
    fn matrix_validation() {
        let ok = PerformanceMatrix::new(labels("A", 1), labels("C", 2), vec![vec![0.0, 1.0 + 1e-10]]);
        assert!(ok.is_ok());
        let out_of_range = PerformanceMatrix::new(labels("A", 1), labels("C", 2), vec![vec![0.0, 1.1]]);
        assert!(matches!(out_of_range, Err(Error::InvalidParameter(_))));
        let ragged = PerformanceMatrix::new(labels("A", 1), labels("C", 2), vec![vec![0.5]]);
        assert_eq!(ragged.unwrap_err(), Error::DimensionMismatch { expected: 2, got: 1 });
        let dup = PerformanceMatrix::new(vec!["a".into(), "a".into()], labels("C", 1), vec![vec![0.5], vec![0.5]]);
        assert!(matches!(dup, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn single_draw_applies_aggregator_once() {
        let perf = PerformanceMatrix::new(labels("A", 2), labels("C", 2), vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w = vec![vec![0.7, 0.3]];
        assert_eq!(expected_utility(&perf, &w, &Wsm).unwrap(), vec![0.7, 0.3]);
        let r = alternative_credal(&perf, &w, &Wsm).unwrap();
        assert_eq!(r.confidence[0][1], 1.0);
        assert_eq!(r.confidence[1][0], 0.0);
        assert_eq!(expected_utility_distributional(&[vec![1.0, 0.0]], &w, &Wsm).unwrap(), 0.7);
    }

    #[test]
    fn weight_dimension_is_checked() {
        let perf = PerformanceMatrix::new(labels("A", 1), labels("C", 2), vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(expected_utility(&perf, &[vec![1.0]], &Wsm).unwrap_err(), Error::DimensionMismatch { expected: 2, got: 1 });
        assert_eq!(expected_utility(&perf, &[], &Wsm).unwrap_err(), Error::EmptyInput);
    }

    /// The trait's default evaluation, bypassing the WSM shortcuts.
    struct Plain;
    impl Aggregator for Plain {
        fn aggregate(&self, a: &[f64], w: &[f64]) -> f64 {
            dot(a, w)
        }
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn wsm_shortcuts_match_double_loop(
            weights in prop::collection::vec(simplex(4), 1..20),
            perf in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..20),
        ) {
            let shortcut = expected_utility_distributional(&perf, &weights, &Wsm).unwrap();
            let full = expected_utility_distributional(&perf, &weights, &Plain).unwrap();
            prop_assert!((shortcut - full).abs() <= 1e-12);
            let single = Wsm.expected(&perf[0], &weights);
            prop_assert!((single - Plain.expected(&perf[0], &weights)).abs() <= 1e-12);
            let constant = vec![perf[0].clone(); 3];
            prop_assert!((expected_utility_distributional(&constant, &weights, &Wsm).unwrap() - single).abs() <= 1e-12);
        }

        #[test]
        fn wsm_utility_is_linear(
            weights in prop::collection::vec(simplex(3), 1..10),
            a in prop::collection::vec(0.0f64..1.0, 3),
            b in prop::collection::vec(0.0f64..1.0, 3),
            alpha in 0.0f64..1.0,
        ) {
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
            let perf = PerformanceMatrix::new(labels("A", 3), labels("C", 3), vec![a, b, mix]).unwrap();
            let u = expected_utility(&perf, &weights, &Wsm).unwrap();
            prop_assert!((u[2] - (alpha * u[0] + (1.0 - alpha) * u[1])).abs() <= 1e-12);
        }

        #[test]
        fn dominance_gives_full_confidence(
            weights in prop::collection::vec(simplex(3), 1..20),
            base in prop::collection::vec(0.0f64..0.5, 3),
            bump in prop::collection::vec(0.01f64..0.5, 3),
        ) {
            let better: Vec<f64> = base.iter().zip(&bump).map(|(x, d)| x + d).collect();
            let perf = PerformanceMatrix::new(labels("A", 2), labels("C", 3), vec![better, base]).unwrap();
            let r = alternative_credal(&perf, &weights, &Wsm).unwrap();
            prop_assert_eq!(r.confidence[0][1], 1.0);
            prop_assert!((r.confidence[0][1] + r.confidence[1][0] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sorting_layout_and_errors() {
        let spec = build_sorting_posterior(&[0.1, 0.2, 0.9], &SortingConfig::new(2)).unwrap();
        let names: Vec<_> = spec.layout().blocks().iter().map(|b| b.name.clone()).collect();
        assert_eq!(names, ["theta_hat[1]", "theta_hat[2]", "theta_hat[3]", "omega_hat[1]", "omega_hat[2]"]);
        assert!(spec.log_density(spec.initial_values()).is_finite());
        let single = build_sorting_posterior(&[0.1, 0.2], &SortingConfig::new(1)).unwrap();
        assert_eq!(single.layout().dim(), 1);
        assert_eq!(
            build_sorting_posterior(&[0.5], &SortingConfig::new(2)).unwrap_err(),
            Error::TooManyClusters { clusters: 2, items: 1 }
        );
        assert!(build_sorting_posterior(&[0.5], &SortingConfig::new(1).with_sigma(0.0)).is_err());
    }

    #[test]
    fn sorting_density_matches_enumeration() {
        let u = [0.2, 0.7];
        let config = SortingConfig::new(2).with_sigma(0.3);
        let spec = build_sorting_posterior(&u, &config).unwrap();
        let x = [0.6, 0.4, 0.1, 0.9, 0.25, 0.75];
        let n = |v: f64, m: f64, s: f64| (-(v - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        // Dir(1/2, 1/2) density on the 2-simplex
        let dir = |t: f64| 1.0 / (std::f64::consts::PI * (t * (1.0 - t)).sqrt());
        let mut expected = n(0.25, 0.5, 1.0).ln() + n(0.75, 0.5, 1.0).ln();
        expected += (dir(0.6) * (0.6 * n(0.2, 0.25, 0.3) + 0.4 * n(0.2, 0.75, 0.3))).ln();
        expected += (dir(0.1) * (0.1 * n(0.7, 0.25, 0.3) + 0.9 * n(0.7, 0.75, 0.3))).ln();
        assert!((spec.log_density(&x) - expected).abs() < 1e-10, "{} vs {expected}", spec.log_density(&x));
    }

    #[test]
    fn draws_variant_with_one_draw_matches_point_variant() {
        let config = SortingConfig::new(2).with_sigma(0.2);
        let a = build_sorting_posterior(&[0.2, 0.7, 0.4], &config).unwrap();
        let b = build_sorting_posterior_from_draws(&[vec![0.2], vec![0.7], vec![0.4]], &config).unwrap();
        let x = a.initial_values().to_vec();
        assert_eq!(a.log_density(&x), b.log_density(&x));
    }
}

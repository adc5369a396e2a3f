//! Mixture of Dirichlet components for grouping decision-makers.
//!
//! Every record's weights `w[r]` come from one of `Z` components
//! `Dir(gamma_omega[z] * omega[z])`. The discrete membership is summed out,
//! leaving per-record mixing proportions `theta[r]`.

use std::sync::Arc;

use itertools::Itertools;

use crate::composition::Composition;
use crate::density::{dirichlet_mean_ln_pdf, ScalarDensity};
use crate::error::{Error, Result};
use crate::likelihood::{compile_records, GammaPrior, LayoutBuilder, LikelihoodOptions};
use crate::model::ModelSpec;
use crate::preference::{Payload, PreferenceRecord};
use crate::sampler::{ChainDraws, PosteriorSamples};

/// Largest cluster count supported by exhaustive relabeling.
pub const MAX_RELABEL_CLUSTERS: usize = 6;

pub fn membership_block(r: usize) -> String {
    format!("theta[{r}]")
}

pub fn center_block(z: usize) -> String {
    format!("omega[{z}]")
}

pub fn center_concentration_block(z: usize) -> String {
    format!("gamma_omega[{z}]")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub clusters: usize,
    /// Dirichlet prior on each `theta[r]`; defaults to 0.01 entries.
    pub lambda_prior: Option<Vec<f64>>,
    /// Dirichlet prior on each center; defaults to 0.01 entries.
    pub delta_prior: Option<Vec<f64>>,
    pub gamma_prior: GammaPrior,
    pub direct_best_to_others: bool,
}

impl MixtureConfig {
    pub fn new(clusters: usize) -> Self {
        Self { clusters, lambda_prior: None, delta_prior: None, gamma_prior: GammaPrior::default(), direct_best_to_others: false }
    }
}

fn prior_vector(v: Option<&Vec<f64>>, len: usize, what: &str) -> Result<Vec<f64>> {
    match v {
        None => Ok(vec![0.01; len]),
        Some(v) if v.len() != len => Err(Error::DimensionMismatch { expected: len, got: v.len() }),
        Some(v) if v.iter().any(|a| !(*a > 0.0)) => Err(Error::InvalidParameter(format!("{what} must be positive"))),
        Some(v) => Ok(v.clone()),
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn component_terms(w: &[f64], theta: &[f64], centers: &[&[f64]], conc: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .zip(centers)
        .zip(conc)
        .map(|((t, c), g)| if *t > 0.0 { t.ln() + dirichlet_mean_ln_pdf(w, c, *g) } else { f64::NEG_INFINITY })
        .collect()
}

fn marginal_slices(w: &[f64], theta: &[f64], centers: &[&[f64]], conc: &[f64]) -> f64 {
    let terms = component_terms(w, theta, centers, conc);
    log_sum_exp(terms.iter().copied())
}

/// `log Σ_z θ_z Dir(w | γ_z Ω_z)`, stabilized by log-sum-exp. Components
/// with `θ_z = 0` are skipped.
pub fn marginal_mixture_logdensity(
    w: &Composition,
    theta: &[f64],
    centers: &[Composition],
    concentrations: &[f64],
) -> Result<f64> {
    let z = centers.len();
    if theta.len() != z {
        return Err(Error::DimensionMismatch { expected: z, got: theta.len() });
    }
    if concentrations.len() != z {
        return Err(Error::DimensionMismatch { expected: z, got: concentrations.len() });
    }
    if let Some(c) = centers.iter().find(|c| c.len() != w.len()) {
        return Err(Error::DimensionMismatch { expected: w.len(), got: c.len() });
    }
    if theta.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameter("mixing proportions must be non-negative".into()));
    }
    if concentrations.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidParameter("concentrations must be positive".into()));
    }
    let cs: Vec<&[f64]> = centers.iter().map(|c| c.values()).collect();
    Ok(marginal_slices(w.values(), theta, &cs, concentrations))
}

/// Block naming of a mixture layout.
#[derive(Clone, Copy)]
pub(crate) struct ComponentNames {
    /// Blocks holding the mixed data, one per item (empty for sorting).
    pub data: Option<fn(usize) -> String>,
    pub theta: fn(usize) -> String,
    pub center: fn(usize) -> String,
    pub concentration: Option<fn(usize) -> String>,
}

const DM_MIXTURE: ComponentNames = ComponentNames {
    data: Some(crate::group::weight_block),
    theta: membership_block,
    center: center_block,
    concentration: Some(center_concentration_block),
};

/// Offsets of the mixture blocks in a layout.
#[derive(Debug, Clone)]
pub(crate) struct MixtureIndex {
    pub n: usize,
    pub weights: Vec<usize>,
    /// Empty for a single cluster.
    pub thetas: Vec<usize>,
    pub centers: Vec<usize>,
    pub concentrations: Vec<usize>,
}

impl MixtureIndex {
    pub fn with_names(layout: &crate::transform::Layout, names: ComponentNames) -> Result<Self> {
        let collect = |f: fn(usize) -> String| -> Vec<usize> {
            (1..).map_while(|k| layout.block(&f(k)).map(|b| b.offset)).collect()
        };
        let weights = names.data.map(collect).unwrap_or_default();
        let centers = collect(names.center);
        let concentrations = names.concentration.map(collect).unwrap_or_default();
        let thetas = collect(names.theta);
        if centers.is_empty() || (names.data.is_some() && weights.is_empty()) {
            return Err(Error::LayoutMismatch("samples do not come from a mixture model".into()));
        }
        if names.concentration.is_some() && concentrations.len() != centers.len() {
            return Err(Error::LayoutMismatch("missing component concentrations".into()));
        }
        if centers.len() > 1 && names.data.is_some() && thetas.len() != weights.len() {
            return Err(Error::LayoutMismatch("missing mixing proportions".into()));
        }
        let n = layout.block(&(names.center)(1)).map(|b| b.len).unwrap_or(0);
        Ok(Self { n, weights, thetas, centers, concentrations })
    }

    fn from_samples(samples: &PosteriorSamples) -> Result<Self> {
        Self::with_names(samples.layout(), DM_MIXTURE)
    }

    pub fn clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn center<'a>(&self, x: &'a [f64], z: usize) -> &'a [f64] {
        &x[self.centers[z]..self.centers[z] + self.n]
    }
}

struct MixtureDensity {
    records: Vec<crate::likelihood::CompiledRecord>,
    index: MixtureIndex,
    lambda: Vec<f64>,
    lambda_mean: Vec<f64>,
    lambda_sum: f64,
    delta_mean: Vec<f64>,
    delta_sum: f64,
    gamma_prior: ScalarDensity,
}

impl MixtureDensity {
    fn ln_density(&self, x: &[f64]) -> f64 {
        let idx = &self.index;
        let z = idx.clusters();
        let mut acc = 0.0;
        for rec in &self.records {
            acc += rec.ln_likelihood(x, &self.gamma_prior);
        }
        let centers: Vec<&[f64]> = (0..z).map(|k| idx.center(x, k)).collect();
        let conc: Vec<f64> = idx.concentrations.iter().map(|o| x[*o]).collect();
        for k in 0..z {
            acc += dirichlet_mean_ln_pdf(centers[k], &self.delta_mean, self.delta_sum);
            acc += self.gamma_prior.ln_pdf(conc[k]);
        }
        if acc == f64::NEG_INFINITY {
            return acc;
        }
        for (r, rec) in self.records.iter().enumerate() {
            let w = rec.weights(x);
            if z == 1 {
                acc += dirichlet_mean_ln_pdf(w, centers[0], conc[0]);
            } else {
                let theta = &x[idx.thetas[r]..idx.thetas[r] + z];
                acc += dirichlet_mean_ln_pdf(theta, &self.lambda_mean, self.lambda_sum);
                acc += marginal_slices(w, theta, &centers, &conc);
            }
        }
        debug_assert_eq!(self.lambda.len(), z);
        acc
    }
}

/// Rough weights implied by one record: row geometric means for a PCM,
/// geometric mean of both BWM vectors, or the closed value vector.
fn point_estimate(record: &PreferenceRecord) -> Vec<f64> {
    let raw: Vec<f64> = match &record.payload {
        Payload::Pcm(m) => {
            let n = m.len();
            (0..n)
                .map(|i| {
                    let logs: f64 = (0..n).map(|j| if i <= j { m[i][j].center().ln() } else { -m[j][i].center().ln() }).sum();
                    (logs / n as f64).exp()
                })
                .collect()
        }
        Payload::Bwm { best_to_others, others_to_worst, .. } => {
            best_to_others.iter().zip(others_to_worst).map(|(b, w)| (w.center() / b.center()).sqrt()).collect()
        }
        Payload::ValueVector { values, .. } => values.iter().map(|v| v.center()).collect(),
    };
    let total: f64 = raw.iter().sum();
    let n = raw.len() as f64;
    // keep the start away from the simplex boundary
    raw.iter().map(|v| 0.9 * v / total + 0.1 / n).collect()
}

/// Farthest-point seeding followed by a few Lloyd iterations.
fn seed_centers(points: &[Vec<f64>], z: usize) -> Vec<Vec<f64>> {
    let n = points[0].len();
    let mut mean = vec![0.0; n];
    for p in points {
        mean.iter_mut().zip(p).for_each(|(m, v)| *m += v / points.len() as f64);
    }
    let farthest_from = |centers: &[Vec<f64>]| -> usize {
        let gap = |p: &Vec<f64>| centers.iter().map(|c| euclidean(p, c)).fold(f64::INFINITY, f64::min);
        (0..points.len()).fold(0, |best, i| if gap(&points[i]) > gap(&points[best]) { i } else { best })
    };
    let mut centers = vec![points[farthest_from(std::slice::from_ref(&mean))].clone()];
    while centers.len() < z {
        centers.push(points[farthest_from(&centers)].clone());
    }
    for _ in 0..10 {
        let mut sums = vec![vec![0.0; n]; z];
        let mut counts = vec![0usize; z];
        for p in points {
            let k = nearest_center(&centers, p);
            sums[k].iter_mut().zip(p).for_each(|(s, v)| *s += v);
            counts[k] += 1;
        }
        for k in 0..z {
            if counts[k] > 0 {
                centers[k] = sums[k].iter().map(|s| s / counts[k] as f64).collect();
            }
        }
    }
    centers
}

fn nearest_center(centers: &[Vec<f64>], p: &[f64]) -> usize {
    (0..centers.len()).min_by(|&a, &b| euclidean(&centers[a], p).total_cmp(&euclidean(&centers[b], p))).unwrap_or(0)
}

/// Builds the marginalized mixture posterior. With one cluster the mixing
/// proportions are dropped and the model reduces to a single Dirichlet
/// aggregate.
pub fn build_mixture_posterior(records: &[PreferenceRecord], config: &MixtureConfig) -> Result<ModelSpec> {
    let z = config.clusters;
    if z == 0 {
        return Err(Error::InvalidConfig("at least one cluster is required".into()));
    }
    if z > records.len() {
        return Err(Error::TooManyClusters { clusters: z, items: records.len() });
    }
    let n = crate::likelihood::check_criteria_count(records)?;
    let lambda = prior_vector(config.lambda_prior.as_ref(), z, "lambda")?;
    let delta = prior_vector(config.delta_prior.as_ref(), n, "delta")?;
    let options = LikelihoodOptions { gamma_prior: config.gamma_prior, direct_best_to_others: config.direct_best_to_others };
    let mut builder = LayoutBuilder::default();
    let mut thetas = Vec::new();
    let mut centers = Vec::new();
    let mut concentrations = Vec::new();
    let compiled = compile_records(records, &mut builder, &options, |b| {
        if z > 1 {
            for r in 1..=records.len() {
                thetas.push(b.push_simplex(membership_block(r), z)?);
            }
        }
        for k in 1..=z {
            centers.push(b.push_simplex(center_block(k), n)?);
        }
        for k in 1..=z {
            concentrations.push(b.push_positive(center_concentration_block(k))?);
        }
        Ok(())
    })?;
    let weights: Vec<usize> = compiled.iter().map(|c| c.w_offset).collect();
    // identical components are a saddle: start them apart, from the data
    let estimates: Vec<Vec<f64>> = records.iter().map(point_estimate).collect();
    let seeds = seed_centers(&estimates, z);
    for (r, est) in estimates.iter().enumerate() {
        builder.init[weights[r]..weights[r] + n].copy_from_slice(est);
        if z > 1 {
            let nearest = nearest_center(&seeds, est);
            let theta: Vec<f64> = (0..z).map(|k| if k == nearest { 0.8 } else { 0.2 / (z - 1) as f64 }).collect();
            builder.init[thetas[r]..thetas[r] + z].copy_from_slice(&theta);
        }
    }
    for (k, seed) in seeds.iter().enumerate() {
        builder.init[centers[k]..centers[k] + n].copy_from_slice(seed);
    }
    let lambda_sum: f64 = lambda.iter().sum();
    let delta_sum: f64 = delta.iter().sum();
    let density = MixtureDensity {
        records: compiled,
        index: MixtureIndex { n, weights, thetas, centers, concentrations },
        lambda_mean: lambda.iter().map(|l| l / lambda_sum).collect(),
        lambda,
        lambda_sum,
        delta_mean: delta.iter().map(|d| d / delta_sum).collect(),
        delta_sum,
        gamma_prior: config.gamma_prior.density(),
    };
    ModelSpec::new(builder.layout, Arc::new(move |x: &[f64]| density.ln_density(x)), builder.init)
}

fn chain_center_means(samples: &PosteriorSamples, idx: &MixtureIndex, chain: usize) -> Vec<Vec<f64>> {
    let iters = samples.iterations() as f64;
    (0..idx.clusters())
        .map(|k| {
            let mut m = vec![0.0; idx.n];
            for it in 0..samples.iterations() {
                for (a, v) in m.iter_mut().zip(idx.center(samples.draw(chain, it), k)) {
                    *a += v;
                }
            }
            m.iter_mut().for_each(|a| *a /= iters);
            m
        })
        .collect()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Permutation `perm` such that component `perm[k]` of a chain matches
/// component `k` of the reference.
fn best_permutation(reference: &[Vec<f64>], chain: &[Vec<f64>]) -> Vec<usize> {
    let z = reference.len();
    (0..z)
        .permutations(z)
        .map(|p| {
            let cost: f64 = p.iter().enumerate().map(|(k, &pk)| euclidean(&reference[k], &chain[pk])).sum();
            (cost, p)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
        .expect("at least one permutation")
}

fn permute_draw(idx: &MixtureIndex, draw: &mut [f64], perm: &[usize]) {
    let old = draw.to_vec();
    let n = idx.n;
    for (k, &pk) in perm.iter().enumerate() {
        draw[idx.centers[k]..idx.centers[k] + n].copy_from_slice(&old[idx.centers[pk]..idx.centers[pk] + n]);
        if !idx.concentrations.is_empty() {
            draw[idx.concentrations[k]] = old[idx.concentrations[pk]];
        }
        for &t in &idx.thetas {
            draw[t + k] = old[t + pk];
        }
    }
}

/// Reorders the components of every chain to match the first chain's
/// component means. Returns the relabeled samples and the permutation
/// applied to each chain.
pub fn relabel_chains(samples: &PosteriorSamples) -> Result<(PosteriorSamples, Vec<Vec<usize>>)> {
    relabel_with(samples, &MixtureIndex::from_samples(samples)?)
}

pub(crate) fn relabel_with(
    samples: &PosteriorSamples,
    idx: &MixtureIndex,
) -> Result<(PosteriorSamples, Vec<Vec<usize>>)> {
    let z = idx.clusters();
    if z > MAX_RELABEL_CLUSTERS {
        return Err(Error::ClusterCountTooLarge(z));
    }
    let reference = chain_center_means(samples, idx, 0);
    let dim = samples.dim();
    let mut perms = Vec::with_capacity(samples.num_chains());
    let mut chains = Vec::with_capacity(samples.num_chains());
    for (c, chain) in samples.chains().iter().enumerate() {
        let perm = if c == 0 { (0..z).collect() } else { best_permutation(&reference, &chain_center_means(samples, idx, c)) };
        let mut values = chain.values.clone();
        if perm.iter().enumerate().any(|(k, &p)| k != p) {
            for draw in values.chunks_mut(dim) {
                permute_draw(idx, draw, &perm);
            }
        }
        chains.push(ChainDraws { values, ..chain.clone() });
        perms.push(perm);
    }
    let relabeled = PosteriorSamples::from_chains(
        samples.layout().clone(),
        samples.reports().to_vec(),
        chains,
        samples.config,
    )?;
    Ok((relabeled, perms))
}

/// Applies one component permutation to every draw of every chain.
pub(crate) fn permute_all(samples: &PosteriorSamples, idx: &MixtureIndex, perm: &[usize]) -> Result<PosteriorSamples> {
    let dim = samples.dim();
    let chains = samples
        .chains()
        .iter()
        .map(|chain| {
            let mut values = chain.values.clone();
            for draw in values.chunks_mut(dim) {
                permute_draw(idx, draw, perm);
            }
            ChainDraws { values, ..chain.clone() }
        })
        .collect();
    PosteriorSamples::from_chains(samples.layout().clone(), samples.reports().to_vec(), chains, samples.config)
}

/// Per-draw component posteriors averaged over draws. `component(x, r, z)`
/// is the log-density of item `r` under component `z` at draw `x`.
pub(crate) fn responsibilities_with(
    samples: &PosteriorSamples,
    idx: &MixtureIndex,
    items: usize,
    component: impl Fn(&[f64], usize, usize) -> f64,
) -> Vec<Vec<f64>> {
    let z = idx.clusters();
    let mut acc = vec![vec![0.0; z]; items];
    if z == 1 {
        acc.iter_mut().for_each(|row| row[0] = 1.0);
        return acc;
    }
    let mut terms = vec![0.0; z];
    for c in 0..samples.num_chains() {
        for it in 0..samples.iterations() {
            let x = samples.draw(c, it);
            for (r, row) in acc.iter_mut().enumerate() {
                let theta = &x[idx.thetas[r]..idx.thetas[r] + z];
                for (k, t) in terms.iter_mut().enumerate() {
                    *t = if theta[k] > 0.0 { theta[k].ln() + component(x, r, k) } else { f64::NEG_INFINITY };
                }
                let total = log_sum_exp(terms.iter().copied());
                if total.is_finite() {
                    for (a, t) in row.iter_mut().zip(&terms) {
                        *a += (t - total).exp();
                    }
                } else {
                    row.iter_mut().for_each(|a| *a += 1.0 / z as f64);
                }
            }
        }
    }
    for row in &mut acc {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|a| *a /= s);
    }
    acc
}

/// Posterior membership probabilities, `R × Z`: per draw the component
/// posterior of each record, averaged over all draws. Expects samples whose
/// labels are already aligned across chains.
pub fn responsibilities(samples: &PosteriorSamples) -> Result<Vec<Vec<f64>>> {
    let idx = MixtureIndex::from_samples(samples)?;
    let n = idx.n;
    Ok(responsibilities_with(samples, &idx, idx.weights.len(), |x, r, k| {
        let w = &x[idx.weights[r]..idx.weights[r] + n];
        dirichlet_mean_ln_pdf(w, idx.center(x, k), x[idx.concentrations[k]])
    }))
}

/// Relabeled mixture draws with derived summaries.
#[derive(Debug, Clone)]
pub struct MixtureResult {
    pub samples: PosteriorSamples,
    /// Posterior mean of each center.
    pub center_means: Vec<Vec<f64>>,
    /// `R × Z` membership probabilities.
    pub memberships: Vec<Vec<f64>>,
}

impl MixtureResult {
    pub fn from_samples(samples: &PosteriorSamples) -> Result<Self> {
        let idx = MixtureIndex::from_samples(samples)?;
        let samples = if idx.clusters() > 1 { relabel_chains(samples)?.0 } else { samples.clone() };
        let center_means = (1..=idx.clusters()).map(|k| samples.mean_of(&center_block(k))).collect::<Result<_>>()?;
        let memberships = responsibilities(&samples)?;
        Ok(Self { samples, center_means, memberships })
    }

    /// Pooled draws of center `z` (1-based).
    pub fn center_draws(&self, z: usize) -> Result<Vec<Vec<f64>>> {
        self.samples.quantity(&center_block(z))
    }

    pub fn weight_draws(&self, r: usize) -> Result<Vec<Vec<f64>>> {
        self.samples.quantity(&crate::group::weight_block(r))
    }

    pub fn membership_draws(&self, r: usize) -> Result<Vec<Vec<f64>>> {
        self.samples.quantity(&membership_block(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::closure;
    use crate::density::log_dirichlet_mean;
    use crate::sampler::SamplerConfig;
    use crate::transform::Constraint;
    use proptest::prelude::*;
    use statrs::function::gamma::ln_gamma;

    fn dirichlet_pdf(x: &[f64], alpha: &[f64]) -> f64 {
        let s: f64 = alpha.iter().sum();
        let mut lp = ln_gamma(s);
        for (xi, a) in x.iter().zip(alpha) {
            lp += (a - 1.0) * xi.ln() - ln_gamma(*a);
        }
        lp.exp()
    }

    #[test]
    fn single_component_is_plain_dirichlet() {
        let w = closure(&[0.2, 0.3, 0.5]).unwrap();
        let c = closure(&[0.3, 0.3, 0.4]).unwrap();
        let m = marginal_mixture_logdensity(&w, &[1.0], &[c.clone()], &[7.0]).unwrap();
        assert_eq!(m, log_dirichlet_mean(&w, &c, 7.0).unwrap());
    }

    #[test]
    fn degenerate_membership_selects_component() {
        let w = closure(&[0.2, 0.3, 0.5]).unwrap();
        let a = closure(&[0.3, 0.3, 0.4]).unwrap();
        let b = closure(&[0.6, 0.3, 0.1]).unwrap();
        let m = marginal_mixture_logdensity(&w, &[1.0, 0.0], &[a.clone(), b], &[7.0, 3.0]).unwrap();
        assert_eq!(m, log_dirichlet_mean(&w, &a, 7.0).unwrap());
    }

    #[test]
    fn dimension_errors() {
        let w = closure(&[0.5, 0.5]).unwrap();
        assert!(marginal_mixture_logdensity(&w, &[0.5, 0.5], &[w.clone()], &[1.0]).is_err());
        let c3 = closure(&[1.0, 1.0, 1.0]).unwrap();
        assert!(marginal_mixture_logdensity(&w, &[1.0], &[c3], &[1.0]).is_err());
    }

    fn composition(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, len).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
    }

    fn setting() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
        (2usize..=4, 1usize..=4).prop_flat_map(|(n, z)| {
            (composition(n), composition(z), prop::collection::vec(composition(n), z), prop::collection::vec(0.5f64..30.0, z))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn matches_linear_space_enumeration((w, theta, centers, conc) in setting()) {
            let brute: f64 = theta.iter().zip(&centers).zip(&conc)
                .map(|((t, c), g)| {
                    let alpha: Vec<f64> = c.iter().map(|ci| g * ci).collect();
                    t * dirichlet_pdf(&w, &alpha)
                })
                .sum();
            let cs: Vec<Composition> = centers.iter().map(|c| Composition::new(c.clone()).unwrap()).collect();
            let m = marginal_mixture_logdensity(&Composition::new(w).unwrap(), &theta, &cs, &conc).unwrap();
            prop_assert!((m.exp() - brute).abs() <= 1e-10 * brute.max(1.0), "{} vs {}", m.exp(), brute);
        }

        #[test]
        fn log_sum_exp_bounds((w, theta, centers, conc) in setting()) {
            let cs: Vec<&[f64]> = centers.iter().map(|c| c.as_slice()).collect();
            let terms = component_terms(&w, &theta, &cs, &conc);
            let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let m = marginal_slices(&w, &theta, &cs, &conc);
            prop_assert!(m >= max - 1e-12);
            prop_assert!(m <= max + (theta.len() as f64).ln() + 1e-12);
        }
    }

    fn consistent_pcm(id: &str, w: &[f64]) -> PreferenceRecord {
        let m: Vec<Vec<f64>> = w.iter().map(|a| w.iter().map(|b| a / b).collect()).collect();
        PreferenceRecord::pcm_points(id, &m)
    }

    #[test]
    fn layout_and_errors() {
        let recs = vec![consistent_pcm("a", &[0.5, 0.3, 0.2]), consistent_pcm("b", &[0.2, 0.3, 0.5])];
        let spec = build_mixture_posterior(&recs, &MixtureConfig::new(2)).unwrap();
        let names: Vec<&str> = spec.layout().blocks().iter().map(|b| b.name.as_str()).collect();
        assert_eq!(
            names,
            ["w[1]", "w[2]", "theta[1]", "theta[2]", "omega[1]", "omega[2]", "gamma_omega[1]", "gamma_omega[2]", "gamma[1]", "gamma[2]"]
        );
        assert!(spec.log_posterior(&spec.initial_point()).is_finite());
        let single = build_mixture_posterior(&recs, &MixtureConfig::new(1)).unwrap();
        assert!(single.layout().block("theta[1]").is_none());
        assert_eq!(
            build_mixture_posterior(&recs, &MixtureConfig::new(3)).unwrap_err(),
            Error::TooManyClusters { clusters: 3, items: 2 }
        );
    }

    /// Tiny synthetic mixture with hand-written draws for relabeling checks.
    fn fake_samples(swap_second: bool) -> PosteriorSamples {
        let mut layout = crate::transform::Layout::new();
        layout.push("w[1]", Constraint::Simplex, 2).unwrap();
        layout.push("theta[1]", Constraint::Simplex, 2).unwrap();
        layout.push("omega[1]", Constraint::Simplex, 2).unwrap();
        layout.push("omega[2]", Constraint::Simplex, 2).unwrap();
        layout.push("gamma_omega[1]", Constraint::Positive, 1).unwrap();
        layout.push("gamma_omega[2]", Constraint::Positive, 1).unwrap();
        let base = [0.7, 0.3, 0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 20.0, 5.0];
        let swapped = [0.7, 0.3, 0.1, 0.9, 0.3, 0.7, 0.8, 0.2, 5.0, 20.0];
        let chain = |d: &[f64]| ChainDraws {
            values: d.repeat(3),
            log_posterior: vec![-1.0, -2.0, -3.0],
            acceptance_rate: 0.3,
            step_sizes: vec![1.0; 7],
        };
        let second = if swap_second { chain(&swapped) } else { chain(&base) };
        PosteriorSamples::from_chains(layout, vec![], vec![chain(&base), second], SamplerConfig::default()).unwrap()
    }

    #[test]
    fn aligned_chains_keep_identity() {
        let (_, perms) = relabel_chains(&fake_samples(false)).unwrap();
        assert_eq!(perms, vec![vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn swapped_chain_is_undone() {
        let s = fake_samples(true);
        let (fixed, perms) = relabel_chains(&s).unwrap();
        assert_eq!(perms[1], vec![1, 0]);
        assert_eq!(fixed.chains()[1].values, fixed.chains()[0].values);
        let lps: Vec<f64> = s.chains().iter().flat_map(|c| c.log_posterior.clone()).collect();
        let lps2: Vec<f64> = fixed.chains().iter().flat_map(|c| c.log_posterior.clone()).collect();
        assert_eq!(lps, lps2);
    }

    #[test]
    fn responsibility_rows_sum_to_one() {
        let resp = responsibilities(&fake_samples(false)).unwrap();
        assert_eq!(resp.len(), 1);
        assert!((resp[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // w = (0.7, 0.3) is nearer center 2 but theta favours center 1
        assert!(resp[0][0] > 0.0 && resp[0][1] > 0.0);
    }
}

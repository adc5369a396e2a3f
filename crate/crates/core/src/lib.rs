//! Bayesian multi-criteria decision making.
//!
//! Preferences from pairwise comparison matrices, best-worst comparisons or
//! value vectors (certain or uncertain) are turned into posterior
//! distributions over criteria weights for individuals and groups. Posterior
//! draws feed credal rankings of criteria and alternatives, clustering of
//! decision-makers, and Bayesian sorting of alternatives.

pub mod alternatives;
pub mod baselines;
pub mod composition;
pub mod credal;
pub mod density;
pub mod error;
pub mod group;
mod likelihood;
pub mod mixture;
pub mod model;
pub mod preference;
pub mod sampler;
pub mod transform;

pub use alternatives::{
    aggregate_wsm, alternative_credal, build_sorting_posterior, expected_utility, Aggregator, PerformanceMatrix,
    SortingConfig, SortingResult, Wsm,
};
pub use composition::{closure, clr, clr_inverse, ClrVector, Composition};
pub use baselines::{ahp_gmm, bwm_consistent_weights, deterministic_wsm};
pub use credal::{credal_confidence, credal_ranking, ranking_graph_dot, CredalRanking};
pub use error::{Error, Result};
pub use group::{build_group_posterior, covariance_from_performance, Aggregation, GroupConfig};
pub use likelihood::{GammaPrior, LikelihoodOptions};
pub use mixture::{build_mixture_posterior, MixtureConfig, MixtureResult};
pub use model::{LogDensity, ModelSpec};
pub use preference::{Payload, PreferenceRecord, UncertainValue, Uncertainty, ValueMethod};
pub use sampler::{sample, summarize, PosteriorSamples, SamplerConfig, SummaryRow};
pub use transform::{Constraint, Layout, UnconstrainedPoint};

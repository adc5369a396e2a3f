mod dataset;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use credal_mcdm::alternatives::{sorting_center_block, utility_draws};
use credal_mcdm::group::{weight_block, AGGREGATE};
use credal_mcdm::mixture::{center_block, center_concentration_block, MAX_RELABEL_CLUSTERS};
use credal_mcdm::{
    alternative_credal, build_group_posterior, build_mixture_posterior, build_sorting_posterior,
    covariance_from_performance, credal_ranking, expected_utility, ranking_graph_dot, sample, summarize, Aggregation,
    CredalRanking, GroupConfig, MixtureConfig, MixtureResult, ModelSpec, PosteriorSamples, SamplerConfig,
    SortingConfig, SortingResult, SummaryRow, Wsm,
};
use log::{info, warn};
use nalgebra::DMatrix;
use serde::Serialize;

use dataset::{CovarianceSource, Dataset};
use output::{diagnostics, samples_csv, warn_rhat, write_atomic, write_json, Diagnostics, Interval};

/// Bayesian multi-criteria decision making: criteria weights, credal
/// rankings, clustering of decision-makers and evaluation of alternatives.
#[derive(Parser)]
#[command(name = "credal-mcdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the group model and rank the criteria.
    Fit(FitArgs),
    /// Cluster decision-makers into subgroups.
    Cluster(ClusterArgs),
    /// Evaluate, rank and optionally sort the alternatives of a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SamplingArgs {
    /// Dataset file (JSON).
    dataset: PathBuf,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 2000)]
    warmup: usize,
    #[arg(long, default_value_t = 2000)]
    draws: usize,
    #[arg(long, env = "CREDAL_MCDM_SEED", default_value_t = 1)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Score both uncertain BWM vectors directly against the weights.
    #[arg(long)]
    direct_best_to_others: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AggregationKind {
    Dirichlet,
    LogisticNormal,
}

#[derive(Args)]
struct AggregationArgs {
    #[arg(long, value_enum, default_value_t = AggregationKind::Dirichlet)]
    aggregation: AggregationKind,
    /// Logistic-normal covariance ε·I, used when the dataset has none.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Scale of the identity prior covariance on the CLR aggregate.
    #[arg(long, default_value_t = 1.0)]
    prior_scale: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    aggregation: AggregationArgs,
    /// Drop near-certain edges between non-adjacent nodes of the ranking graph.
    #[arg(long)]
    prune: bool,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Number of subgroups.
    #[arg(long)]
    groups: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    aggregation: AggregationArgs,
    /// Sort the alternatives into this many ordered groups.
    #[arg(long)]
    sort: Option<usize>,
    /// Spread of utilities around their group center.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    prune: bool,
}

enum Failure {
    Validation(String),
    Sampler(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<dataset::ValidationError> for Failure {
    fn from(e: dataset::ValidationError) -> Self {
        Failure::Validation(e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn sampler_config(args: &SamplingArgs) -> Outcome<SamplerConfig> {
    let config = SamplerConfig { chains: args.chains, warmup: args.warmup, draws: args.draws, ..SamplerConfig::with_seed(args.seed) };
    config.validate().map_err(invalid)?;
    Ok(config)
}

fn run_sampler(spec: &ModelSpec, config: &SamplerConfig, what: &str) -> Outcome<PosteriorSamples> {
    info!("sampling {what}: {} chains × ({} warmup + {} draws), seed {}", config.chains, config.warmup, config.draws, config.seed);
    sample(spec, config).map_err(|e| Failure::Sampler(format!("{what}: {e}")))
}

fn prepare_out(dir: &Path) -> Outcome<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Other(anyhow::anyhow!("cannot create {}: {e}", dir.display())))
}

fn group_config(ds: &Dataset, args: &AggregationArgs, direct_best_to_others: bool) -> Outcome<GroupConfig> {
    let n = ds.criteria.len();
    let aggregation = match args.aggregation {
        AggregationKind::Dirichlet => Aggregation::Dirichlet,
        AggregationKind::LogisticNormal => {
            if !(args.epsilon > 0.0) || !(args.prior_scale > 0.0) {
                return Err(invalid("--epsilon and --prior-scale must be positive"));
            }
            let covariance = match &ds.covariance {
                Some(CovarianceSource::Matrix(m)) => m.clone(),
                Some(CovarianceSource::FromPerformance) => {
                    let perf = ds.performance.as_ref().expect("validated with the dataset");
                    let m = perf.alternatives().len();
                    if m <= n {
                        warn!(
                            "covariance from {m} alternatives is singular for {n} criteria; \
                             the logistic-normal fit is nearly degenerate and may not mix"
                        );
                    }
                    covariance_from_performance(perf.values()).map_err(invalid)?
                }
                None => DMatrix::identity(n, n) * args.epsilon,
            };
            Aggregation::LogisticNormal { covariance, prior_covariance: Some(DMatrix::identity(n, n) * args.prior_scale) }
        }
    };
    Ok(GroupConfig { aggregation, direct_best_to_others, ..GroupConfig::default() })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Summary<'a, M: Serialize> {
    command: &'a str,
    seed: u64,
    config: SamplerConfig,
    model: M,
    criteria: &'a [String],
    decision_makers: Vec<&'a str>,
    parameters: &'a [SummaryRow],
    diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    criteria_ranking: Option<&'a CredalRanking>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GroupModel {
    aggregation: AggregationKind,
    /// Block whose draws rank the criteria.
    ranked: String,
}

struct GroupFit {
    samples: PosteriorSamples,
    /// `w_star`, or `w[1]` for a single decision-maker.
    weights: String,
}

/// Fits the group model and writes samples, summary and criteria ranking.
fn fit_group(ds: &Dataset, sampling: &SamplingArgs, agg: &AggregationArgs, prune: bool, command: &str) -> Outcome<GroupFit> {
    let config = sampler_config(sampling)?;
    let spec = build_group_posterior(&ds.records, &group_config(ds, agg, sampling.direct_best_to_others)?).map_err(invalid)?;
    prepare_out(&sampling.out)?;
    let samples = run_sampler(&spec, &config, "group model")?;
    let weights = if ds.records.len() == 1 { weight_block(1) } else { AGGREGATE.to_string() };
    let rows = summarize(&samples);
    warn_rhat(&rows);
    let draws = samples.quantity(&weights).map_err(|e| Failure::Other(e.into()))?;
    let ranking = credal_ranking(&draws, &ds.criteria).map_err(|e| Failure::Other(e.into()))?;
    write_atomic(&sampling.out.join("samples.csv"), samples_csv(&samples).as_bytes())?;
    write_atomic(&sampling.out.join("criteria_ranking.dot"), ranking_graph_dot(&ranking, prune).as_bytes())?;
    let summary = Summary {
        command,
        seed: config.seed,
        config,
        model: GroupModel { aggregation: agg.aggregation, ranked: weights.clone() },
        criteria: &ds.criteria,
        decision_makers: ds.records.iter().map(|r| r.id.as_str()).collect(),
        parameters: &rows,
        diagnostics: diagnostics(&rows, &samples),
        criteria_ranking: Some(&ranking),
    };
    write_json(&sampling.out.join("summary.json"), &summary)?;
    Ok(GroupFit { samples, weights })
}

fn fit(args: FitArgs) -> Outcome<()> {
    let ds = dataset::load(&args.sampling.dataset)?;
    let fitted = fit_group(&ds, &args.sampling, &args.aggregation, args.prune, "fit")?;
    let means = fitted.samples.mean_of(&fitted.weights).map_err(|e| Failure::Other(e.into()))?;
    for (label, m) in ds.criteria.iter().zip(means) {
        println!("{label}\t{m:.3}");
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ClusterModel {
    groups: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CenterSummary {
    cluster: usize,
    weights: Vec<Interval>,
    concentration: Interval,
    /// Decision-makers whose most probable subgroup this is.
    members: Vec<String>,
}

#[derive(Serialize)]
struct Centers<'a> {
    criteria: &'a [String],
    centers: Vec<CenterSummary>,
}

fn column(draws: &[Vec<f64>], j: usize) -> Vec<f64> {
    draws.iter().map(|d| d[j]).collect()
}

fn argmax(row: &[f64]) -> usize {
    (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0)
}

fn cluster(args: ClusterArgs) -> Outcome<()> {
    let ds = dataset::load(&args.sampling.dataset)?;
    let config = sampler_config(&args.sampling)?;
    let z = args.groups;
    if z == 0 || z > ds.records.len() {
        return Err(invalid(format!("--groups must be between 1 and the number of decision-makers ({})", ds.records.len())));
    }
    if z > MAX_RELABEL_CLUSTERS {
        return Err(invalid(format!("--groups above {MAX_RELABEL_CLUSTERS} is not supported")));
    }
    let mixture = MixtureConfig { direct_best_to_others: args.sampling.direct_best_to_others, ..MixtureConfig::new(z) };
    let spec = build_mixture_posterior(&ds.records, &mixture).map_err(invalid)?;
    prepare_out(&args.sampling.out)?;
    let raw = run_sampler(&spec, &config, "mixture model")?;
    let result = MixtureResult::from_samples(&raw).map_err(|e| Failure::Other(e.into()))?;
    let samples = &result.samples;
    let rows = summarize(samples);
    warn_rhat(&rows);

    let out = &args.sampling.out;
    write_atomic(&out.join("samples.csv"), samples_csv(samples).as_bytes())?;
    let mut csv = String::from("decisionMaker");
    for k in 1..=z {
        csv.push_str(&format!(",cluster{k}"));
    }
    csv.push('\n');
    for (record, row) in ds.records.iter().zip(&result.memberships) {
        csv.push_str(&record.id);
        for p in row {
            csv.push_str(&format!(",{p:?}"));
        }
        csv.push('\n');
    }
    write_atomic(&out.join("responsibilities.csv"), csv.as_bytes())?;

    let mut centers = Vec::with_capacity(z);
    for k in 1..=z {
        let draws = samples.quantity(&center_block(k)).map_err(|e| Failure::Other(e.into()))?;
        let conc = samples.quantity(&center_concentration_block(k)).map_err(|e| Failure::Other(e.into()))?;
        centers.push(CenterSummary {
            cluster: k,
            weights: (0..ds.criteria.len()).map(|j| Interval::of(&column(&draws, j))).collect(),
            concentration: Interval::of(&column(&conc, 0)),
            members: ds
                .records
                .iter()
                .zip(&result.memberships)
                .filter(|(_, row)| argmax(row) == k - 1)
                .map(|(r, _)| r.id.clone())
                .collect(),
        });
    }
    for c in &centers {
        let means: Vec<String> = c.weights.iter().map(|w| format!("{:.3}", w.mean)).collect();
        println!("cluster {}: [{}] members: {}", c.cluster, means.join(", "), c.members.join(", "));
    }
    write_json(&out.join("centers.json"), &Centers { criteria: &ds.criteria, centers })?;
    let summary = Summary {
        command: "cluster",
        seed: config.seed,
        config,
        model: ClusterModel { groups: z },
        criteria: &ds.criteria,
        decision_makers: ds.records.iter().map(|r| r.id.as_str()).collect(),
        parameters: &rows,
        diagnostics: diagnostics(&rows, samples),
        criteria_ranking: None,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AlternativeUtility {
    name: String,
    expected_utility: f64,
    utility: Interval,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Utilities<'a> {
    aggregator: &'a str,
    weights: &'a str,
    criteria: &'a [String],
    alternatives: Vec<AlternativeUtility>,
    ranking: &'a CredalRanking,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SortedAlternative {
    name: String,
    utility: f64,
    /// 1-based; group 1 has the highest center.
    group: usize,
    memberships: Vec<f64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Sorting {
    groups: usize,
    sigma: f64,
    seed: u64,
    centers: Vec<Interval>,
    alternatives: Vec<SortedAlternative>,
    parameters: Vec<SummaryRow>,
    diagnostics: Diagnostics,
}

fn evaluate(args: EvaluateArgs) -> Outcome<()> {
    let ds = dataset::load(&args.sampling.dataset)?;
    let Some(perf) = ds.performance.clone() else {
        return Err(invalid(format!("{}: evaluate needs a `performance` block", args.sampling.dataset.display())));
    };
    let sorting_config = match args.sort {
        Some(z) => {
            if z == 0 || z > perf.alternatives().len() {
                return Err(invalid(format!("--sort must be between 1 and the number of alternatives ({})", perf.alternatives().len())));
            }
            if z > MAX_RELABEL_CLUSTERS {
                return Err(invalid(format!("--sort above {MAX_RELABEL_CLUSTERS} is not supported")));
            }
            if !(args.sigma > 0.0 && args.sigma.is_finite()) {
                return Err(invalid("--sigma must be positive"));
            }
            Some(SortingConfig::new(z).with_sigma(args.sigma))
        }
        None => None,
    };
    let fitted = fit_group(&ds, &args.sampling, &args.aggregation, args.prune, "evaluate")?;
    let weights = fitted.samples.quantity(&fitted.weights).map_err(|e| Failure::Other(e.into()))?;
    let expected = expected_utility(&perf, &weights, &Wsm).map_err(|e| Failure::Other(e.into()))?;
    let per_draw = utility_draws(&perf, &weights, &Wsm).map_err(|e| Failure::Other(e.into()))?;
    let ranking = alternative_credal(&perf, &weights, &Wsm).map_err(|e| Failure::Other(e.into()))?;
    let out = &args.sampling.out;
    let alternatives: Vec<AlternativeUtility> = perf
        .alternatives()
        .iter()
        .enumerate()
        .map(|(i, name)| AlternativeUtility {
            name: name.clone(),
            expected_utility: expected[i],
            utility: Interval::of(&column(&per_draw, i)),
        })
        .collect();
    for a in &alternatives {
        println!("{}\t{:.3}", a.name, a.expected_utility);
    }
    let utilities =
        Utilities { aggregator: "wsm", weights: &fitted.weights, criteria: &ds.criteria, alternatives, ranking: &ranking };
    write_json(&out.join("utilities.json"), &utilities)?;
    write_atomic(&out.join("alternatives_ranking.dot"), ranking_graph_dot(&ranking, args.prune).as_bytes())?;

    if let Some(config) = sorting_config {
        let spec = build_sorting_posterior(&expected, &config).map_err(invalid)?;
        let sampler = sampler_config(&args.sampling)?;
        let samples = run_sampler(&spec, &sampler, "sorting model")?;
        let items: Vec<Vec<f64>> = expected.iter().map(|u| vec![*u]).collect();
        let result = SortingResult::from_samples(&samples, &items, config.sigma).map_err(|e| Failure::Other(e.into()))?;
        let rows = summarize(&result.samples);
        warn_rhat(&rows);
        let mut centers = Vec::with_capacity(config.clusters);
        for k in 1..=config.clusters {
            let draws = result.samples.quantity(&sorting_center_block(k)).map_err(|e| Failure::Other(e.into()))?;
            centers.push(Interval::of(&column(&draws, 0)));
        }
        let assignments = result.assignments();
        let sorted = perf
            .alternatives()
            .iter()
            .enumerate()
            .map(|(i, name)| SortedAlternative {
                name: name.clone(),
                utility: expected[i],
                group: assignments[i] + 1,
                memberships: result.memberships[i].clone(),
            })
            .collect();
        let sorting = Sorting {
            groups: config.clusters,
            sigma: config.sigma,
            seed: sampler.seed,
            centers,
            alternatives: sorted,
            diagnostics: diagnostics(&rows, &result.samples),
            parameters: rows,
        };
        write_json(&out.join("sorting.json"), &sorting)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => fit(args),
        Command::Cluster(args) => cluster(args),
        Command::Evaluate(args) => evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Sampler(msg)) => {
            eprintln!("error: sampler failed: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

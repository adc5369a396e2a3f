mod common;

use common::{assert_close, alignment_matrix, ALIGNMENT_ALTERNATIVES, ALIGNMENT_UTILITIES, ALIGNMENT_WEIGHTS};
use credal_mcdm::alternatives::{build_sorting_posterior_from_draws, utility_draws};
use credal_mcdm::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

fn alignment() -> PerformanceMatrix {
    let criteria = ["Time", "Precision", "Recall", "Recall+", "Consistency"];
    PerformanceMatrix::new(
        ALIGNMENT_ALTERNATIVES.iter().map(|s| s.to_string()).collect(),
        criteria.iter().map(|s| s.to_string()).collect(),
        alignment_matrix(),
    )
    .unwrap()
}

/// Stand-in for fitted weight draws: Dirichlet draws around the published
/// mean weights.
fn weight_draws(seed: u64, concentration: f64, count: usize) -> Vec<Vec<f64>> {
    let dist = Dirichlet::new(ALIGNMENT_WEIGHTS.map(|w| w * concentration)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| dist.sample(&mut rng).to_vec()).collect()
}

fn sort(utilities: &[f64], clusters: usize, sigma: f64, seed: u64) -> SortingResult {
    let config = SortingConfig::new(clusters).with_sigma(sigma);
    let spec = build_sorting_posterior(utilities, &config).unwrap();
    let samples = sample(&spec, &SamplerConfig::with_seed(seed)).unwrap();
    let items: Vec<Vec<f64>> = utilities.iter().map(|u| vec![*u]).collect();
    SortingResult::from_samples(&samples, &items, sigma).unwrap()
}

#[test]
fn alignment_deterministic_utilities() {
    let u = deterministic_wsm(&alignment(), &ALIGNMENT_WEIGHTS).unwrap();
    assert_close(&u, &ALIGNMENT_UTILITIES, 0.001, "utility");
}

#[test]
fn alignment_expected_utilities_and_ranking() {
    let perf = alignment();
    let draws = weight_draws(1, 200.0, 8000);
    let u = expected_utility(&perf, &draws, &Wsm).unwrap();
    assert_close(&u, &ALIGNMENT_UTILITIES, 0.005, "expected utility");

    let ranking = alternative_credal(&perf, &draws, &Wsm).unwrap();
    let mut by_utility: Vec<usize> = (0..6).collect();
    by_utility.sort_by(|&a, &b| ALIGNMENT_UTILITIES[b].total_cmp(&ALIGNMENT_UTILITIES[a]));
    assert_eq!(ranking.order(), by_utility);
    assert!(ranking.confidence[0][1] >= 0.95, "LogMapBio over SANOM: {}", ranking.confidence[0][1]);
    for i in 0..6 {
        for j in 0..6 {
            assert!((ranking.confidence[i][j] + ranking.confidence[j][i] - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn sorting_recovers_two_groups() {
    let result = sort(&[0.10, 0.12, 0.90, 0.88], 2, 0.05, 31);
    assert_close(&result.centers, &[0.89, 0.11], 0.05, "centers");
    assert_eq!(result.assignments(), vec![1, 1, 0, 0]);
    for row in &result.memberships {
        assert!(row.iter().copied().fold(0.0, f64::max) >= 0.95, "{row:?}");
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn single_sorting_cluster_sits_at_the_mean() {
    let u = [0.3, 0.5, 0.4, 0.6];
    let result = sort(&u, 1, 0.1, 32);
    assert!((result.centers[0] - 0.45).abs() <= 0.05, "{}", result.centers[0]);
    assert!(result.memberships.iter().all(|row| row == &[1.0]));
}

#[test]
fn sorting_is_translation_equivariant() {
    let u = [0.10, 0.12, 0.50, 0.48];
    let shift = 0.3;
    let shifted: Vec<f64> = u.iter().map(|v| v + shift).collect();
    let a = sort(&u, 2, 0.05, 33);
    let b = sort(&shifted, 2, 0.05, 33);
    let moved: Vec<f64> = a.centers.iter().map(|c| c + shift).collect();
    assert_close(&b.centers, &moved, 0.02, "centers");
    for (ra, rb) in a.memberships.iter().zip(&b.memberships) {
        assert_close(rb, ra, 0.02, "memberships");
    }
}

/// Exact 1-D 2-means: the best threshold split of the sorted values.
/// Returns the indices of the upper group.
fn two_means_upper(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sse = |group: &[usize]| {
        let m = group.iter().map(|&i| values[i]).sum::<f64>() / group.len() as f64;
        group.iter().map(|&i| (values[i] - m).powi(2)).sum::<f64>()
    };
    let cut = (1..values.len()).min_by(|&a, &b| (sse(&idx[..a]) + sse(&idx[a..])).total_cmp(&(sse(&idx[..b]) + sse(&idx[b..])))).unwrap();
    let mut upper = idx[cut..].to_vec();
    upper.sort();
    upper
}

#[test]
fn alignment_sorting_matches_two_means() {
    let result = sort(&ALIGNMENT_UTILITIES, 2, 0.05, 34);
    let upper: Vec<usize> = result.assignments().iter().enumerate().filter(|(_, z)| **z == 0).map(|(i, _)| i).collect();
    let oracle = two_means_upper(&ALIGNMENT_UTILITIES);
    assert_eq!(oracle, [0, 1], "LogMapBio and SANOM");
    assert_eq!(upper, oracle, "memberships {:?}", result.memberships);
}

#[test]
fn sorting_over_utility_draws() {
    let perf = alignment();
    let draws = weight_draws(2, 200.0, 4000);
    let per_draw = utility_draws(&perf, &draws, &Wsm).unwrap();
    // every 40th draw, transposed to one row per alternative
    let items: Vec<Vec<f64>> = (0..6).map(|i| per_draw.iter().step_by(40).map(|d| d[i]).collect()).collect();
    let config = SortingConfig::new(2).with_sigma(0.05);
    let spec = build_sorting_posterior_from_draws(&items, &config).unwrap();
    let samples = sample(&spec, &SamplerConfig { warmup: 1000, draws: 1000, ..SamplerConfig::with_seed(35) }).unwrap();
    let result = SortingResult::from_samples(&samples, &items, 0.05).unwrap();
    assert!(result.centers[0] > result.centers[1]);
    assert_eq!(result.assignments()[0], 0);
    assert_eq!(result.assignments()[5], 1);
}

#![allow(dead_code)]

use credal_mcdm::{PreferenceRecord, UncertainValue};

fn parse_row(row: &str) -> Vec<f64> {
    row.split_whitespace()
        .map(|t| match t.split_once('/') {
            Some((a, b)) => a.parse::<f64>().unwrap() / b.parse::<f64>().unwrap(),
            None => t.parse().unwrap(),
        })
        .collect()
}

pub const AHP_PCMS: [[&str; 5]; 6] = [
    ["1 3 5 4 7", "1/3 1 3 2 5", "1/5 1/3 1 1/2 3", "1/4 1/2 2 1 3", "1/7 1/5 1/3 1/3 1"],
    ["1 4 3 5 8", "1/4 1 4 3 6", "1/3 1/4 1 1 5", "1/5 1/3 1 1 7", "1/8 1/6 1/5 1/7 1"],
    ["1 1/2 3 2 5", "2 1 5 1 2", "1/3 1/5 1 2 1/2", "1/2 1 1/2 1 5", "1/5 1/2 2 1/5 1"],
    ["1 3 5 2 6", "1/3 1 1 3 2", "1/5 1 1 4 5", "1/2 1/3 1/4 1 1/2", "1/6 1/2 1/5 2 1"],
    ["1 2 5 4 9", "1/2 1 3 2 6", "1/5 1/3 1 1 2", "1/4 1/2 1 1 3", "1/9 1/6 1/2 1/3 1"],
    ["1 2 6 3 3", "1/2 1 2 5 4", "1/6 1/2 1 1/2 1", "1/3 1/5 2 1 5", "1/3 1/4 1 1/5 1"],
];

pub const AHP_AGGREGATE: [f64; 5] = [0.443, 0.251, 0.112, 0.132, 0.062];
pub const AHP_DM1_GMM: [f64; 5] = [0.491, 0.232, 0.092, 0.138, 0.046];

pub fn ahp_matrix(k: usize) -> Vec<Vec<f64>> {
    AHP_PCMS[k].iter().map(|r| parse_row(r)).collect()
}

pub fn ahp_records() -> Vec<PreferenceRecord> {
    (0..6).map(|k| PreferenceRecord::pcm_points(format!("DM{}", k + 1), &ahp_matrix(k))).collect()
}

pub const BWM_BEST: [[f64; 8]; 6] = [
    [3., 4., 6., 1., 5., 2., 9., 7.],
    [1., 2., 8., 4., 5., 3., 9., 6.],
    [2., 2., 3., 1., 5., 5., 9., 8.],
    [2., 1., 8., 2., 9., 3., 8., 8.],
    [2., 4., 9., 1., 4., 3., 5., 5.],
    [1., 2., 9., 1., 3., 5., 5., 4.],
];

pub const BWM_WORST: [[f64; 8]; 6] = [
    [7., 6., 4., 9., 5., 8., 1., 3.],
    [9., 8., 2., 5., 4., 5., 1., 3.],
    [8., 8., 5., 9., 5., 5., 1., 2.],
    [8., 9., 2., 8., 1., 8., 2., 2.],
    [8., 6., 1., 9., 6., 7., 4., 4.],
    [9., 8., 1., 9., 7., 5., 5., 6.],
];

pub const BWM_CERTAIN: [f64; 8] = [0.203, 0.171, 0.060, 0.218, 0.090, 0.130, 0.054, 0.071];

pub fn bwm_records() -> Vec<PreferenceRecord> {
    (0..6).map(|k| PreferenceRecord::bwm_points(format!("DM{}", k + 1), &BWM_BEST[k], &BWM_WORST[k])).collect()
}

/// The BWM records with every comparison except the reference entries
/// replaced by `wrap(v)`.
pub fn bwm_records_with(wrap: impl Fn(f64) -> UncertainValue) -> Vec<PreferenceRecord> {
    bwm_records()
        .into_iter()
        .map(|rec| match rec.payload {
            credal_mcdm::Payload::Bwm { best, worst, best_to_others, others_to_worst } => {
                let map = |v: Vec<UncertainValue>, keep: usize| {
                    v.into_iter()
                        .enumerate()
                        .map(|(j, x)| if j == keep { x } else { wrap(x.as_point().unwrap()) })
                        .collect()
                };
                PreferenceRecord::bwm(rec.id, best, worst, map(best_to_others, best), map(others_to_worst, worst))
            }
            _ => unreachable!(),
        })
        .collect()
}

pub const ALIGNMENT_ALTERNATIVES: [&str; 6] = ["LogMapBio", "SANOM", "LogMapLite", "KEPLER", "Lily", "ALIN"];
pub const ALIGNMENT_WEIGHTS: [f64; 5] = [0.083, 0.247, 0.24, 0.323, 0.107];
pub const ALIGNMENT_UTILITIES: [f64; 6] = [0.889, 0.789, 0.636, 0.627, 0.702, 0.571];

pub fn alignment_matrix() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 0.89, 1.0, 1.0, 1.0],
        vec![0.962, 0.89, 0.923, 0.829, 0.0],
        vec![1.0, 0.96, 0.802, 0.382, 0.0],
        vec![0.714, 0.96, 0.813, 0.421, 0.0],
        vec![0.671, 0.87, 0.879, 0.684, 0.0],
        vec![0.68, 1.0, 0.67, 0.0, 1.0],
    ]
}

pub fn assert_close(actual: &[f64], expected: &[f64], tol: f64, what: &str) {
    assert_eq!(actual.len(), expected.len(), "{what}: length");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!((a - e).abs() <= tol, "{what}[{}]: {a:.4} vs {e:.4} (tolerance {tol})", i + 1);
    }
}

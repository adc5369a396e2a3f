//! Credal orderings: for every pair of items, the posterior probability that
//! one outranks the other, estimated from draws.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_draws(draws: &[Vec<f64>]) -> Result<usize> {
    let first = draws.first().ok_or(Error::EmptyInput)?;
    let n = first.len();
    if let Some(d) = draws.iter().find(|d| d.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: d.len() });
    }
    Ok(n)
}

/// Twice the number of draws with `draw[i] > draw[j]`, plus the ties.
fn half_counts(draws: &[Vec<f64>], i: usize, j: usize) -> usize {
    draws
        .iter()
        .map(|d| match d[i].partial_cmp(&d[j]) {
            Some(std::cmp::Ordering::Greater) => 2,
            Some(std::cmp::Ordering::Equal) => 1,
            _ => 0,
        })
        .sum()
}

/// Fraction of draws in which item `i` exceeds item `j`; ties count one
/// half. `i == j` gives 0.5.
pub fn credal_confidence(draws: &[Vec<f64>], i: usize, j: usize) -> Result<f64> {
    let n = check_draws(draws)?;
    for index in [i, j] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
    }
    Ok(half_counts(draws, i, j) as f64 / (2 * draws.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredalRanking {
    pub labels: Vec<String>,
    /// `confidence[i][j]` is the confidence that item `i` outranks item `j`.
    pub confidence: Vec<Vec<f64>>,
    pub means: Vec<f64>,
}

impl CredalRanking {
    /// Item indices by descending mean; ties keep input order.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.labels.len()).collect();
        idx.sort_by(|&a, &b| self.means[b].total_cmp(&self.means[a]));
        idx
    }

    /// Confidences between consecutive items of [`order`](Self::order).
    pub fn chain(&self) -> Vec<(usize, usize, f64)> {
        self.order().windows(2).map(|w| (w[0], w[1], self.confidence[w[0]][w[1]])).collect()
    }
}

/// Full pairwise confidence matrix over `draws` (each draw holds one value
/// per item), with posterior means.
pub fn credal_ranking(draws: &[Vec<f64>], labels: &[String]) -> Result<CredalRanking> {
    let n = check_draws(draws)?;
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if n < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: n });
    }
    let q = draws.len();
    let mut confidence = vec![vec![0.5; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = half_counts(draws, i, j) as f64 / (2 * q) as f64;
            confidence[i][j] = d;
            confidence[j][i] = 1.0 - d;
        }
    }
    let mut means = vec![0.0; n];
    for d in draws {
        for (m, v) in means.iter_mut().zip(d) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= q as f64);
    Ok(CredalRanking { labels: labels.to_vec(), confidence, means })
}

fn sanitize_ids(labels: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut id: String = l.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
            if id.is_empty() || id.starts_with(|c: char| c.is_ascii_digit()) {
                id.insert(0, 'n');
            }
            if !seen.insert(id.clone()) {
                id = format!("{id}_{i}");
                seen.insert(id.clone());
            }
            id
        })
        .collect()
}

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: nodes by descending mean, an edge `u -> v` for every
/// pair with confidence at least 0.5 (exact ties drawn from the higher
/// ranked item only). With `prune_trivial`, edges whose label rounds to
/// 1.00 are kept only between consecutive items.
pub fn ranking_graph_dot(ranking: &CredalRanking, prune_trivial: bool) -> String {
    let order = ranking.order();
    let ids = sanitize_ids(&ranking.labels);
    let mut out = String::from("digraph credal_ranking {\n    rankdir=TB;\n    node [shape=box];\n");
    for &i in &order {
        let label = format!("{} ({:.3})", ranking.labels[i], ranking.means[i]);
        let _ = writeln!(out, "    {} [label=\"{}\"];", ids[i], escape(&label));
    }
    for (p, &u) in order.iter().enumerate() {
        for (q, &v) in order.iter().enumerate() {
            if u == v {
                continue;
            }
            let d = ranking.confidence[u][v];
            if d < 0.5 || (d == 0.5 && q < p) {
                continue;
            }
            let label = format!("{d:.2}");
            if prune_trivial && label == "1.00" && q != p + 1 {
                continue;
            }
            let _ = writeln!(out, "    {} -> {} [label=\"{label}\"];", ids[u], ids[v]);
        }
    }
    out.push_str("}\n");
    out
}

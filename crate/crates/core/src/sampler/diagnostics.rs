use serde::{Deserialize, Serialize};

use super::PosteriorSamples;
use crate::error::{Error, Result};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linear interpolation between order statistics of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Split-chain potential scale reduction. Zero within-chain variance gives
/// 1 when all chains agree and infinity otherwise.
pub fn rhat_of_chains(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::SingleChain);
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if n < 2 {
        return Err(Error::InvalidConfig("too few draws for split R-hat".into()));
    }
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let len = c.len();
        halves.push(&c[..n]);
        halves.push(&c[len - n..]);
    }
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let grand = mean(&means);
    let b = n as f64 / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves.iter().map(|h| variance(h)).sum::<f64>() / m;
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// Multi-chain effective sample size with Geyer's initial positive sequence:
/// autocorrelations are accumulated in adjacent pairs until the first pair
/// with a negative sum.
pub fn ess_of_chains(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let m = chains.len();
    if n < 4 || m == 0 {
        return (n * m) as f64;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    // biased per-chain autocovariance at one lag
    let acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| (0..n - lag).map(|t| (c[t] - mu) * (c[t + lag] - mu)).sum::<f64>() / nf)
            .sum::<f64>()
            / m as f64
    };
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / m as f64;
    let grand = mean(&means);
    let b = if m > 1 { nf / (m as f64 - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    if var_plus <= 0.0 || !var_plus.is_finite() {
        return (n * m) as f64;
    }
    let rho = |lag: usize| if lag == 0 { 1.0 } else { 1.0 - (w - acov(lag)) / var_plus };

    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let total = (n * m) as f64;
    total / tau.max(1.0 / total.log10())
}

/// Split R-hat of one named scalar parameter.
pub fn rhat(samples: &PosteriorSamples, parameter: &str) -> Result<f64> {
    rhat_of_chains(&samples.parameter_chains(parameter)?)
}

/// Effective sample size of one named scalar parameter.
pub fn ess(samples: &PosteriorSamples, parameter: &str) -> Result<f64> {
    Ok(ess_of_chains(&samples.parameter_chains(parameter)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    #[serde(rename = "q2.5")]
    pub q025: f64,
    #[serde(rename = "q50")]
    pub q50: f64,
    #[serde(rename = "q97.5")]
    pub q975: f64,
    /// `None` for single-chain runs.
    pub rhat: Option<f64>,
    pub ess: f64,
}

fn summarize_chains(parameter: String, chains: &[Vec<f64>]) -> SummaryRow {
    let mut pooled: Vec<f64> = chains.concat();
    let m = mean(&pooled);
    let sd = variance(&pooled).sqrt();
    pooled.sort_by(f64::total_cmp);
    SummaryRow {
        parameter,
        mean: m,
        sd,
        q025: quantile_sorted(&pooled, 0.025),
        q50: quantile_sorted(&pooled, 0.5),
        q975: quantile_sorted(&pooled, 0.975),
        rhat: rhat_of_chains(chains).ok(),
        ess: ess_of_chains(chains),
    }
}

/// One row per parameter in layout order, followed by reported quantities.
pub fn summarize(samples: &PosteriorSamples) -> Vec<SummaryRow> {
    let mut names = samples.layout().parameter_names();
    for rule in samples.reports() {
        let len = samples.layout().block(&rule.block).map(|b| b.len).unwrap_or(0);
        names.extend((1..=len).map(|i| format!("{}[{i}]", rule.name)));
    }
    names
        .into_iter()
        .map(|name| {
            let chains = samples.parameter_chains(&name).expect("names come from the layout");
            summarize_chains(name, &chains)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn iid(seed: u64, chains: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..chains).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect()
    }

    #[test]
    fn exchangeable_chains_have_unit_rhat() {
        let r = rhat_of_chains(&iid(1, 4, 2000)).unwrap();
        assert!((0.99..=1.01).contains(&r), "rhat {r}");
    }

    #[test]
    fn offset_chain_inflates_rhat() {
        let mut chains = iid(2, 2, 1000);
        chains[1].iter_mut().for_each(|v| *v += 10.0);
        assert!(rhat_of_chains(&chains).unwrap() > 2.0);
    }

    #[test]
    fn single_chain_has_no_rhat() {
        assert_eq!(rhat_of_chains(&iid(3, 1, 100)).unwrap_err(), Error::SingleChain);
    }

    #[test]
    fn iid_ess_is_close_to_sample_count() {
        let e = ess_of_chains(&iid(4, 4, 1000));
        assert!((e - 4000.0).abs() < 800.0, "ess {e}");
    }

    #[test]
    fn autocorrelated_ess_is_smaller() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..2000)
                    .map(|_| {
                        let e: f64 = rng.sample(StandardNormal);
                        x = 0.9 * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        // AR(1) with phi = 0.9 has ESS ratio (1 - phi) / (1 + phi)
        let expected = 8000.0 * 0.1 / 1.9;
        let e = ess_of_chains(&chains);
        assert!((e - expected).abs() < 0.3 * expected, "ess {e} vs {expected}");
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.025) - 1.075).abs() < 1e-12);
    }

    #[test]
    fn constant_parameter_summary() {
        let row = summarize_chains("c".into(), &[vec![2.5; 50], vec![2.5; 50]]);
        assert_eq!(row.sd, 0.0);
        assert_eq!((row.q025, row.q50, row.q975, row.mean), (2.5, 2.5, 2.5, 2.5));
        assert_eq!(row.rhat, Some(1.0));
    }
}

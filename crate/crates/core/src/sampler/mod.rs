//! Adaptive random-walk Metropolis over a [`ModelSpec`].
//!
//! Each iteration sweeps the unconstrained coordinates one at a time with a
//! Gaussian proposal whose scale is tuned per coordinate during warmup and
//! frozen afterwards. Simplex blocks additionally get a joint shift move, and
//! every sweep ends with a full-dimensional move whose covariance is learned
//! during warmup. Chains run on separate threads with their own RNG, seeded from
//! `(seed, chain index)`.

mod diagnostics;

pub use diagnostics::{ess, ess_of_chains, quantile_sorted, rhat, rhat_of_chains, summarize, SummaryRow};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ReportRule};
use crate::transform::{Block, Constraint, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    pub target_acceptance: f64,
    pub adapt_window: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { chains: 4, warmup: 2000, draws: 2000, seed: 1, target_acceptance: 0.30, adapt_window: 50 }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidConfig("at least one chain is required".into()));
        }
        if self.warmup == 0 || self.draws == 0 {
            return Err(Error::InvalidConfig("warmup and draws must be positive".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidConfig("target acceptance must lie in (0, 1)".into()));
        }
        if self.adapt_window == 0 {
            return Err(Error::InvalidConfig("adaptation window must be positive".into()));
        }
        Ok(())
    }
}

/// Sub-seed of chain `index`: a SplitMix64 hash of the run seed and the
/// chain index.
pub fn chain_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Retained draws of one chain, stored in constrained space.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// Row-major `iterations × dim`.
    pub values: Vec<f64>,
    pub log_posterior: Vec<f64>,
    pub acceptance_rate: f64,
    /// Proposal scales at the end of warmup, one per move (the joint move
    /// last, when present).
    pub step_sizes: Vec<f64>,
}

/// Posterior draws organized as chains × iterations × parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    layout: Layout,
    reports: Vec<ReportRule>,
    chains: Vec<ChainDraws>,
    iterations: usize,
    pub config: SamplerConfig,
}

impl PosteriorSamples {
    /// Assembles samples from raw chains; used by the sampler and by
    /// post-processing such as relabeling.
    pub fn from_chains(
        layout: Layout,
        reports: Vec<ReportRule>,
        chains: Vec<ChainDraws>,
        config: SamplerConfig,
    ) -> Result<Self> {
        let dim = layout.dim();
        let iterations = chains.first().map(|c| c.log_posterior.len()).unwrap_or(0);
        for c in &chains {
            if c.values.len() != iterations * dim || c.log_posterior.len() != iterations {
                return Err(Error::LayoutMismatch("chains have inconsistent shapes".into()));
            }
        }
        Ok(Self { layout, reports, chains, iterations, config })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn reports(&self) -> &[ReportRule] {
        &self.reports
    }

    pub fn chains(&self) -> &[ChainDraws] {
        &self.chains
    }

    pub fn num_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Constrained values of draw `iter` in chain `chain`.
    pub fn draw(&self, chain: usize, iter: usize) -> &[f64] {
        let d = self.dim();
        &self.chains[chain].values[iter * d..(iter + 1) * d]
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.chains.iter().map(|c| c.acceptance_rate).collect()
    }

    fn block(&self, name: &str) -> Result<&Block> {
        self.layout.block(name).ok_or_else(|| Error::UnknownParameter(name.into()))
    }

    /// Per-chain traces of one scalar parameter, addressed by column name
    /// (e.g. `w[2][3]`, `gamma_star`, or a reported `w_star[1]`).
    pub fn parameter_chains(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let (block, index) = match self.layout.block(name) {
            Some(b) if b.len == 1 => (name, None),
            _ => parse_column(name),
        };
        let width = self.quantity_width(block)?;
        let index = match index {
            Some(i) if i >= 1 && i <= width => i - 1,
            None if width == 1 => 0,
            _ => return Err(Error::UnknownParameter(name.into())),
        };
        Ok((0..self.num_chains())
            .map(|c| (0..self.iterations).map(|it| self.quantity_at(block, c, it)[index]).collect())
            .collect())
    }

    fn quantity_width(&self, name: &str) -> Result<usize> {
        if let Some(rule) = self.reports.iter().find(|r| r.name == name) {
            return Ok(self.block(&rule.block)?.len);
        }
        Ok(self.block(name)?.len)
    }

    fn quantity_at(&self, name: &str, chain: usize, iter: usize) -> Vec<f64> {
        let draw = self.draw(chain, iter);
        if let Some(rule) = self.reports.iter().find(|r| r.name == name) {
            let b = self.layout.block(&rule.block).expect("report rules reference layout blocks");
            return rule.apply(&draw[b.range()]);
        }
        let b = self.layout.block(name).expect("checked by caller");
        draw[b.range()].to_vec()
    }

    /// All draws of a block or reported quantity, pooled over chains in
    /// chain order.
    pub fn quantity(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        self.quantity_width(name)?;
        let mut out = Vec::with_capacity(self.num_chains() * self.iterations);
        for c in 0..self.num_chains() {
            for it in 0..self.iterations {
                out.push(self.quantity_at(name, c, it));
            }
        }
        Ok(out)
    }

    /// Posterior mean of a block or reported quantity.
    pub fn mean_of(&self, name: &str) -> Result<Vec<f64>> {
        let draws = self.quantity(name)?;
        let q = draws.len() as f64;
        let width = draws.first().map(|d| d.len()).unwrap_or(0);
        let mut mean = vec![0.0; width];
        for d in &draws {
            for (m, v) in mean.iter_mut().zip(d) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= q);
        Ok(mean)
    }
}

/// Splits `w_star[2]` into (`w_star`, Some(2)) and `w[1][3]` into (`w[1]`, Some(3)).
fn parse_column(name: &str) -> (&str, Option<usize>) {
    if let Some(stripped) = name.strip_suffix(']') {
        if let Some(open) = stripped.rfind('[') {
            if let Ok(i) = stripped[open + 1..].parse::<usize>() {
                return (&name[..open], Some(i));
            }
        }
    }
    (name, None)
}

/// Ranges of unconstrained coordinates moved together: every coordinate on
/// its own, plus a joint shift of each simplex block with at least two free
/// coordinates. The shift changes only the reference component, which
/// single-coordinate moves cannot do without passing through many small
/// correlated steps.
fn proposal_moves(layout: &Layout) -> Vec<std::ops::Range<usize>> {
    let mut moves: Vec<_> = (0..layout.free_dim()).map(|k| k..k + 1).collect();
    for b in layout.blocks() {
        if b.constraint == Constraint::Simplex && b.free_len >= 2 {
            moves.push(b.free_range());
        }
    }
    moves
}

struct ChainRun {
    draws: ChainDraws,
    warmup_accepts: usize,
}

/// Gaussian random walk over all coordinates at once. Its covariance is
/// re-estimated over doubling windows of warmup draws, each estimate
/// replacing the previous one, and frozen after warmup. It moves strongly
/// coupled parameters together (e.g. individual weights tied tightly to an
/// aggregate).
struct JointMove {
    /// Warmup iterations collected so far, and the window end points.
    begin: usize,
    boundaries: Vec<usize>,
    count: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
    chol: Option<DMatrix<f64>>,
    scale: f64,
    tries: usize,
    accepts: usize,
}

impl JointMove {
    fn new(d: usize, warmup: usize) -> Self {
        let begin = warmup / 10;
        let end = warmup - warmup / 10;
        let mut boundaries = Vec::new();
        let mut len = (warmup / 20).max(25);
        let mut b = begin;
        while b < end {
            let mut e = b + len;
            if e + 2 * len > end {
                e = end;
            }
            boundaries.push(e);
            b = e;
            len *= 2;
        }
        Self {
            begin,
            boundaries,
            count: 0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
            chol: None,
            scale: 2.38 / (d as f64).sqrt(),
            tries: 0,
            accepts: 0,
        }
    }

    /// Records the state after warmup iteration `iter`.
    fn observe(&mut self, iter: usize, u: &[f64]) {
        if iter < self.begin || self.boundaries.is_empty() {
            return;
        }
        let x = DVector::from_column_slice(u);
        self.count += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.m2.ger(1.0, &delta, &delta2, 1.0);
        if iter + 1 == self.boundaries[0] {
            self.boundaries.remove(0);
            self.estimate();
        }
    }

    fn estimate(&mut self) {
        let d = self.mean.len();
        let n = self.count;
        if n >= 10 {
            let mut cov = &self.m2 / (n - 1) as f64;
            // shrink toward the diagonal when the window is short
            let lambda = d as f64 / (n + d) as f64;
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        cov[(i, j)] *= 1.0 - lambda;
                    }
                }
            }
            let ridge = 1e-10 * (cov.trace() / d as f64).max(1e-12);
            for i in 0..d {
                cov[(i, i)] += ridge;
            }
            if let Some(c) = cov.cholesky() {
                self.chol = Some(c.l());
            }
        }
        self.count = 0;
        self.mean.fill(0.0);
        self.m2.fill(0.0);
    }

    fn adapt_scale(&mut self, target: f64) {
        if self.tries > 0 {
            let rate = self.accepts as f64 / self.tries as f64;
            self.scale = (self.scale * (3.0 * (rate - target)).exp()).clamp(1e-8, 1e4);
            self.tries = 0;
            self.accepts = 0;
        }
    }

    fn propose(&self, u: &mut [f64], rng: &mut ChaCha8Rng) -> bool {
        let Some(l) = &self.chol else { return false };
        let z = DVector::from_iterator(u.len(), (0..u.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let step = l * z * self.scale;
        u.iter_mut().zip(step.iter()).for_each(|(a, b)| *a += b);
        true
    }
}

fn run_chain(model: &ModelSpec, config: &SamplerConfig, index: usize) -> Result<ChainRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(config.seed, index));
    let layout = model.layout();
    let d = layout.free_dim();
    let mut buf = vec![0.0; layout.dim()];

    let base = model.initial_point().0;
    let base_lp = model.log_posterior_into(&base, &mut buf);
    if !base_lp.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    // dispersed start around the default initialization
    let mut u: Vec<f64> = base.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
    let mut lp = model.log_posterior_into(&u, &mut buf);
    if !lp.is_finite() {
        u = base;
        lp = model.log_posterior_into(&u, &mut buf);
    }
    let mut current_x = buf.clone();

    let moves = proposal_moves(layout);
    let mut scales = vec![1.0f64; moves.len()];
    let mut window_accepts = vec![0usize; moves.len()];
    let mut joint = (d >= 2).then(|| JointMove::new(d, config.warmup));
    // joint moves per sweep, so that they carry weight comparable to the
    // coordinate sweep
    let joint_repeats = d.div_ceil(4);
    let mut warmup_accepts = 0usize;
    let mut accepts = 0usize;
    let mut proposals = 0usize;
    let mut values = Vec::with_capacity(config.draws * layout.dim());
    let mut lps = Vec::with_capacity(config.draws);
    let mut saved = vec![0.0; d];
    let total = config.warmup + config.draws;

    for iter in 0..total {
        let warm = iter < config.warmup;
        for (k, mv) in moves.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let step = scales[k] * z;
            let range = mv.clone();
            saved[range.clone()].copy_from_slice(&u[range.clone()]);
            u[range.clone()].iter_mut().for_each(|v| *v += step);
            let proposal = model.log_posterior_into(&u, &mut buf);
            let log_ratio = proposal - lp;
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept && proposal.is_finite() {
                lp = proposal;
                current_x.copy_from_slice(&buf);
                if warm {
                    window_accepts[k] += 1;
                    warmup_accepts += 1;
                } else {
                    accepts += 1;
                }
            } else {
                u[range.clone()].copy_from_slice(&saved[range]);
            }
            if !warm {
                proposals += 1;
            }
        }
        if let Some(jm) = joint.as_mut() {
            for _ in 0..joint_repeats {
                saved.copy_from_slice(&u);
                if !jm.propose(&mut u, &mut rng) {
                    break;
                }
                let proposal = model.log_posterior_into(&u, &mut buf);
                let log_ratio = proposal - lp;
                let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
                if accept && proposal.is_finite() {
                    lp = proposal;
                    current_x.copy_from_slice(&buf);
                    if warm {
                        jm.accepts += 1;
                        warmup_accepts += 1;
                    } else {
                        accepts += 1;
                    }
                } else {
                    u.copy_from_slice(&saved);
                }
                if warm {
                    jm.tries += 1;
                } else {
                    proposals += 1;
                }
            }
            if warm {
                jm.observe(iter, &u);
            }
        }
        if warm && (iter + 1) % config.adapt_window == 0 {
            let w = config.adapt_window as f64;
            for (s, a) in scales.iter_mut().zip(window_accepts.iter_mut()) {
                let rate = *a as f64 / w;
                *s = (*s * (3.0 * (rate - config.target_acceptance)).exp()).clamp(1e-8, 1e4);
                *a = 0;
            }
            if let Some(jm) = joint.as_mut() {
                jm.adapt_scale(config.target_acceptance);
            }
        }
        if !warm {
            values.extend_from_slice(&current_x);
            lps.push(lp);
        }
    }
    let acceptance_rate = if proposals == 0 { 1.0 } else { accepts as f64 / proposals as f64 };
    if let Some(jm) = &joint {
        scales.push(jm.scale);
    }
    Ok(ChainRun {
        draws: ChainDraws { values, log_posterior: lps, acceptance_rate, step_sizes: scales },
        warmup_accepts,
    })
}

/// Runs `config.chains` chains and returns the retained draws.
pub fn sample(model: &ModelSpec, config: &SamplerConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    if !model.log_posterior(&model.initial_point()).is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let runs: Vec<Result<ChainRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.chains)
            .map(|i| scope.spawn(move || run_chain(model, config, i)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler thread panicked")).collect()
    });
    let mut chains = Vec::with_capacity(config.chains);
    for (i, run) in runs.into_iter().enumerate() {
        let run = run?;
        if run.warmup_accepts == 0 && model.layout().free_dim() > 0 {
            return Err(Error::AllProposalsRejected { chain: i });
        }
        chains.push(run.draws);
    }
    PosteriorSamples::from_chains(model.layout().clone(), model.reports().to_vec(), chains, *config)
}

//! Parameter layouts and the bijections between constrained parameter values
//! and the unconstrained space explored by the sampler.
//!
//! Simplex blocks use the additive log-ratio map with the last coordinate as
//! reference, positive blocks use `log`, bounded blocks a scaled logistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Support of a parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Constraint {
    /// A composition of the block's length.
    Simplex,
    Positive,
    Real,
    Bounded { lo: f64, hi: f64 },
}

/// A named, contiguous run of parameters sharing one constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub constraint: Constraint,
    /// Offset into the constrained vector.
    pub offset: usize,
    /// Number of constrained values.
    pub len: usize,
    /// Offset into the unconstrained vector.
    pub free_offset: usize,
    /// Number of unconstrained coordinates.
    pub free_len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }

    pub fn free_range(&self) -> std::ops::Range<usize> {
        self.free_offset..self.free_offset + self.free_len
    }

    /// Column names of the block's constrained values, e.g. `w[2][3]`.
    /// Scalar blocks keep the bare name.
    pub fn element_names(&self) -> Vec<String> {
        if self.len == 1 && self.constraint != Constraint::Simplex {
            vec![self.name.clone()]
        } else {
            (1..=self.len).map(|i| format!("{}[{i}]", self.name)).collect()
        }
    }
}

/// Ordered list of parameter blocks. Spans tile both the constrained and the
/// unconstrained vectors without gaps or overlap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    blocks: Vec<Block>,
    dim: usize,
    free_dim: usize,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block and returns its index.
    pub fn push(&mut self, name: impl Into<String>, constraint: Constraint, len: usize) -> Result<usize> {
        let name = name.into();
        if len == 0 {
            return Err(Error::LayoutMismatch(format!("block `{name}` is empty")));
        }
        if self.blocks.iter().any(|b| b.name == name) {
            return Err(Error::LayoutMismatch(format!("duplicate block `{name}`")));
        }
        let free_len = match constraint {
            Constraint::Simplex => {
                if len < 2 {
                    return Err(Error::LayoutMismatch(format!(
                        "simplex block `{name}` needs at least two components"
                    )));
                }
                len - 1
            }
            Constraint::Bounded { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidInterval { lo, hi });
                }
                len
            }
            Constraint::Positive | Constraint::Real => len,
        };
        self.blocks.push(Block {
            name,
            constraint,
            offset: self.dim,
            len,
            free_offset: self.free_dim,
            free_len,
        });
        self.dim += len;
        self.free_dim += free_len;
        Ok(self.blocks.len() - 1)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Total number of constrained values.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of unconstrained coordinates.
    pub fn free_dim(&self) -> usize {
        self.free_dim
    }

    /// Column names in layout order.
    pub fn parameter_names(&self) -> Vec<String> {
        self.blocks.iter().flat_map(|b| b.element_names()).collect()
    }

    /// Maps constrained values to the unconstrained space.
    pub fn to_unconstrained(&self, values: &[f64]) -> Result<UnconstrainedPoint> {
        if values.len() != self.dim {
            return Err(Error::LayoutMismatch(format!(
                "expected {} constrained values, got {}",
                self.dim,
                values.len()
            )));
        }
        let mut out = vec![0.0; self.free_dim];
        for b in &self.blocks {
            let x = &values[b.range()];
            let u = &mut out[b.free_range()];
            match b.constraint {
                Constraint::Simplex => {
                    if x.iter().any(|v| !(*v > 0.0)) {
                        return Err(Error::LayoutMismatch(format!("block `{}` is not on the simplex", b.name)));
                    }
                    let sum: f64 = x.iter().sum();
                    if (sum - 1.0).abs() > crate::composition::SUM_TOLERANCE {
                        return Err(Error::LayoutMismatch(format!("block `{}` does not sum to one", b.name)));
                    }
                    let last = x[b.len - 1].ln();
                    for (ui, xi) in u.iter_mut().zip(x) {
                        *ui = xi.ln() - last;
                    }
                }
                Constraint::Positive => {
                    for (ui, xi) in u.iter_mut().zip(x) {
                        if !(*xi > 0.0) {
                            return Err(Error::LayoutMismatch(format!("block `{}` must be positive", b.name)));
                        }
                        *ui = xi.ln();
                    }
                }
                Constraint::Real => u.copy_from_slice(x),
                Constraint::Bounded { lo, hi } => {
                    for (ui, xi) in u.iter_mut().zip(x) {
                        if !(*xi > lo && *xi < hi) {
                            return Err(Error::LayoutMismatch(format!(
                                "block `{}` must lie strictly inside ({lo}, {hi})",
                                b.name
                            )));
                        }
                        let t = (xi - lo) / (hi - lo);
                        *ui = t.ln() - (-t).ln_1p();
                    }
                }
            }
        }
        Ok(UnconstrainedPoint(out))
    }

    /// Maps an unconstrained point back, returning the constrained values and
    /// the log absolute Jacobian determinant of the map.
    pub fn from_unconstrained(&self, u: &UnconstrainedPoint) -> Result<(Vec<f64>, f64)> {
        if u.0.len() != self.free_dim {
            return Err(Error::LayoutMismatch(format!(
                "expected {} unconstrained values, got {}",
                self.free_dim,
                u.0.len()
            )));
        }
        let mut out = vec![0.0; self.dim];
        let log_jac = self.constrain_into(&u.0, &mut out);
        Ok((out, log_jac))
    }

    /// Unchecked variant of [`Layout::from_unconstrained`] writing into a
    /// caller-owned buffer.
    pub(crate) fn constrain_into(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let mut log_jac = 0.0;
        for b in &self.blocks {
            let ub = &u[b.free_range()];
            let xb = &mut out[b.range()];
            match b.constraint {
                Constraint::Simplex => log_jac += alr_inverse(ub, xb),
                Constraint::Positive => {
                    for (x, v) in xb.iter_mut().zip(ub) {
                        *x = v.exp();
                        log_jac += v;
                    }
                }
                Constraint::Real => xb.copy_from_slice(ub),
                Constraint::Bounded { lo, hi } => {
                    let width = hi - lo;
                    for (x, v) in xb.iter_mut().zip(ub) {
                        // log sigmoid(v) and log(1 - sigmoid(v)), computed stably
                        let log_s = -softplus(-v);
                        let log_1ms = -softplus(*v);
                        let s = log_s.exp();
                        *x = (lo + width * s).clamp(lo, hi);
                        log_jac += width.ln() + log_s + log_1ms;
                    }
                }
            }
        }
        log_jac
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse additive log-ratio: `x_i = exp(u_i) / (1 + Σ exp(u_k))` for the
/// free coordinates and `x_n = 1 / (1 + Σ exp(u_k))`. Returns `Σ_i log x_i`,
/// the log-Jacobian of the map onto the first `n − 1` coordinates.
fn alr_inverse(u: &[f64], x: &mut [f64]) -> f64 {
    let n = x.len();
    let max = u.iter().copied().fold(0.0f64, f64::max);
    let mut denom = (-max).exp();
    for (xi, ui) in x.iter_mut().zip(u) {
        *xi = (ui - max).exp();
        denom += *xi;
    }
    x[n - 1] = (-max).exp();
    let log_denom = denom.ln() + max;
    let mut log_jac = 0.0;
    for (i, xi) in x.iter_mut().enumerate() {
        *xi /= denom;
        let log_xi = if i < n - 1 { u[i] } else { 0.0 } - log_denom;
        log_jac += log_xi;
    }
    log_jac
}

/// A point in the sampler's unconstrained space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedPoint(pub Vec<f64>);

impl UnconstrainedPoint {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

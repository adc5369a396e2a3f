//! The contract between model builders and the sampler.

use std::fmt;
use std::sync::Arc;

use crate::composition::clr_inverse_slice;
use crate::error::{Error, Result};
use crate::transform::{Constraint, Layout, UnconstrainedPoint};

/// Log-density over constrained parameter values laid out as in the model's
/// [`Layout`]. Implementations must be pure and reentrant.
pub trait LogDensity: Send + Sync {
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<F> LogDensity for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn log_density(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// How a block is turned into a reported quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMap {
    /// CLR coordinates mapped back to the simplex.
    ClrInverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRule {
    /// Name of the reported quantity.
    pub name: String,
    /// Source block in the layout.
    pub block: String,
    pub map: ReportMap,
}

impl ReportRule {
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        match self.map {
            ReportMap::ClrInverse => clr_inverse_slice(values)
                .map(|c| c.into_inner())
                .unwrap_or_else(|_| vec![f64::NAN; values.len()]),
        }
    }
}

/// A posterior ready for sampling: parameter layout, log-density, default
/// initialization and reporting rules.
#[derive(Clone)]
pub struct ModelSpec {
    layout: Layout,
    density: Arc<dyn LogDensity>,
    init: Vec<f64>,
    reports: Vec<ReportRule>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("layout", &self.layout)
            .field("init", &self.init)
            .field("reports", &self.reports)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    /// `init` holds constrained values and must lie in the interior of every
    /// block's support.
    pub fn new(layout: Layout, density: Arc<dyn LogDensity>, init: Vec<f64>) -> Result<Self> {
        layout.to_unconstrained(&init)?;
        Ok(Self { layout, density, init, reports: Vec::new() })
    }

    pub fn with_report(mut self, rule: ReportRule) -> Result<Self> {
        if self.layout.block(&rule.block).is_none() {
            return Err(Error::UnknownParameter(rule.block));
        }
        self.reports.push(rule);
        Ok(self)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn reports(&self) -> &[ReportRule] {
        &self.reports
    }

    /// Default initialization in constrained space.
    pub fn initial_values(&self) -> &[f64] {
        &self.init
    }

    pub fn initial_point(&self) -> UnconstrainedPoint {
        self.layout
            .to_unconstrained(&self.init)
            .expect("initial values validated at construction")
    }

    /// Log-density over constrained values, without Jacobian terms.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.density.log_density(x)
    }

    /// Log-posterior at an unconstrained point, including the log-Jacobian of
    /// the constraining transform.
    pub fn log_posterior(&self, u: &UnconstrainedPoint) -> f64 {
        let mut buf = vec![0.0; self.layout.dim()];
        if u.values().len() != self.layout.free_dim() {
            return f64::NAN;
        }
        self.log_posterior_into(u.values(), &mut buf)
    }

    pub(crate) fn log_posterior_into(&self, u: &[f64], buf: &mut [f64]) -> f64 {
        let log_jac = self.layout.constrain_into(u, buf);
        if !log_jac.is_finite() || !self.in_support(buf) {
            return f64::NEG_INFINITY;
        }
        let lp = self.density.log_density(buf) + log_jac;
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    /// Rejects points whose constrained image left the open support through
    /// floating-point underflow.
    fn in_support(&self, x: &[f64]) -> bool {
        self.layout.blocks().iter().all(|b| {
            let xb = &x[b.range()];
            match b.constraint {
                Constraint::Simplex | Constraint::Positive => xb.iter().all(|v| *v > 0.0 && v.is_finite()),
                Constraint::Real => xb.iter().all(|v| v.is_finite()),
                Constraint::Bounded { lo, hi } => xb.iter().all(|v| *v > lo && *v < hi),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_posterior_adds_jacobian() {
        let mut layout = Layout::new();
        layout.push("s", Constraint::Positive, 1).unwrap();
        // exponential(1) density on s
        let spec = ModelSpec::new(layout, Arc::new(|x: &[f64]| -x[0]), vec![1.0]).unwrap();
        let u = UnconstrainedPoint(vec![0.5]);
        let expected = -(0.5f64.exp()) + 0.5;
        assert!((spec.log_posterior(&u) - expected).abs() < 1e-12);
    }

    #[test]
    fn init_must_be_interior() {
        let mut layout = Layout::new();
        layout.push("b", Constraint::Bounded { lo: 0.0, hi: 1.0 }, 1).unwrap();
        assert!(ModelSpec::new(layout, Arc::new(|_: &[f64]| 0.0), vec![1.0]).is_err());
    }

    #[test]
    fn underflowed_simplex_is_outside_support() {
        let mut layout = Layout::new();
        layout.push("w", Constraint::Simplex, 2).unwrap();
        let spec = ModelSpec::new(layout, Arc::new(|_: &[f64]| 0.0), vec![0.5, 0.5]).unwrap();
        assert_eq!(spec.log_posterior(&UnconstrainedPoint(vec![-800.0])), f64::NEG_INFINITY);
    }
}

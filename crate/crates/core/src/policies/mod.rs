//! Decision policies behind one interface.
//!
//! A policy maps the history it has observed to an arm choice. `select` may
//! advance internal sampler state (the Gibbs warm start) but only `observe`
//! feeds new data in.

mod linear;
mod ts_conf;

use rand::{Rng, RngCore};

pub use crate::history::{DecisionRecord, History};
pub use linear::{default_beta, GaussianTs, LinUcb, LinUcbConf, Ridge, ScoreMode};
pub use ts_conf::{TsConf, TsConfMcmc};

use crate::env::ArmContext;
use crate::error::{Error, Result};
use crate::linalg::dot;

pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Returns the `arm_id` of one of the offered contexts.
    fn select(&mut self, offered: &[ArmContext], rng: &mut dyn RngCore) -> Result<usize>;

    fn observe(&mut self, record: &DecisionRecord) -> Result<()>;
}

/// Highest score wins; ties go to the lowest `arm_id`.
pub fn argmax_arm(offered: &[ArmContext], scores: &[f64]) -> Result<usize> {
    if offered.is_empty() {
        return Err(Error::ContractViolation("no arms offered".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    for (ctx, &score) in offered.iter().zip(scores) {
        if score.is_nan() {
            return Err(Error::ContractViolation(format!(
                "score for arm {} is NaN",
                ctx.arm_id
            )));
        }
        best = match best {
            Some((s, id)) if s > score || (s == score && id < ctx.arm_id) => Some((s, id)),
            _ => Some((score, ctx.arm_id)),
        };
    }
    Ok(best.map(|(_, id)| id).expect("offered set is non-empty"))
}

pub(crate) fn linear_scores(theta: &[f64], offered: &[ArmContext]) -> Result<Vec<f64>> {
    offered
        .iter()
        .map(|c| {
            if c.features.len() != theta.len() {
                return Err(Error::DimensionMismatch {
                    expected: theta.len(),
                    actual: c.features.len(),
                });
            }
            Ok(dot(theta, &c.features))
        })
        .collect()
}

/// Knows the true preference vector; regret is zero by construction.
#[derive(Debug, Clone)]
pub struct Oracle {
    theta: Vec<f64>,
}

impl Oracle {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }
}

impl Policy for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn select(&mut self, offered: &[ArmContext], _rng: &mut dyn RngCore) -> Result<usize> {
        argmax_arm(offered, &linear_scores(&self.theta, offered)?)
    }

    fn observe(&mut self, _record: &DecisionRecord) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct UniformRandom;

impl Policy for UniformRandom {
    fn name(&self) -> &str {
        "uniform-random"
    }

    fn select(&mut self, offered: &[ArmContext], rng: &mut dyn RngCore) -> Result<usize> {
        if offered.is_empty() {
            return Err(Error::ContractViolation("no arms offered".into()));
        }
        Ok(offered[rng.random_range(0..offered.len())].arm_id)
    }

    fn observe(&mut self, _record: &DecisionRecord) -> Result<()> {
        Ok(())
    }
}

//! User simulator with herding-biased feedback.
//!
//! The user's expected reward for arm `a` is `θᵀx_a`. What the user reports
//! is pulled toward the arm's visible historical rating `h_a`:
//!
//! ```text
//!   V_t(a) = α·h_{t,a} + (1 − α)·θᵀx_a + η,    η ~ N(0, σ_a²)
//! ```
//!
//! Feedback is never clipped to the rating scale.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;

pub const RATING_MIN: f64 = 0.0;
pub const RATING_MAX: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmContext {
    pub arm_id: usize,
    pub features: Vec<f64>,
    pub historical_rating: f64,
    /// Number of ratings folded into `historical_rating` (the initial value counts as one).
    #[serde(default = "one")]
    pub rating_count: u64,
}

fn one() -> u64 {
    1
}

impl ArmContext {
    pub fn new(arm_id: usize, features: Vec<f64>, historical_rating: f64) -> Self {
        Self {
            arm_id,
            features,
            historical_rating,
            rating_count: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.features.len(),
            });
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation(format!(
                "arm {} has non-finite features",
                self.arm_id
            )));
        }
        let h = self.historical_rating;
        if !h.is_finite() || !(RATING_MIN..=RATING_MAX).contains(&h) {
            return Err(Error::ContractViolation(format!(
                "arm {} historical rating {h} outside [{RATING_MIN}, {RATING_MAX}]",
                self.arm_id
            )));
        }
        Ok(())
    }

    /// `[h; x]`
    pub fn augmented(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.features.len() + 1);
        out.push(self.historical_rating);
        out.extend_from_slice(&self.features);
        out
    }
}

/// Ground-truth parameters `Ψ = [θ, α, σ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: Vec<f64>,
    pub alpha: f64,
    /// Per-arm noise standard deviations, indexed by arm id.
    pub sigma: Vec<f64>,
}

impl ModelParams {
    pub fn new(theta: Vec<f64>, alpha: f64, sigma: Vec<f64>) -> Result<Self> {
        let p = Self {
            theta,
            alpha,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_shared_noise(
        theta: Vec<f64>,
        alpha: f64,
        noise_variance: f64,
        n_arms: usize,
    ) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::ContractViolation(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Self::new(theta, alpha, vec![noise_variance.sqrt(); n_arms])
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::ContractViolation(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if let Some(s) = self.sigma.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::ContractViolation(format!(
                "noise scale {s} is not strictly positive"
            )));
        }
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation(
                "theta has non-finite entries".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn sigma_for(&self, arm_id: usize) -> Result<f64> {
        self.sigma.get(arm_id).copied().ok_or_else(|| {
            Error::ContractViolation(format!(
                "no noise scale for arm {arm_id} ({} configured)",
                self.sigma.len()
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub value: f64,
    pub round: usize,
    pub arm_id: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistoryPolicy {
    #[default]
    Static,
    RunningMean,
}

pub fn expected_reward(theta: &[f64], context: &ArmContext) -> Result<f64> {
    if theta.len() != context.features.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            actual: context.features.len(),
        });
    }
    Ok(dot(theta, &context.features))
}

/// Feedback with the noise term supplied by the caller.
pub fn feedback_with_noise(params: &ModelParams, context: &ArmContext, eta: f64) -> Result<f64> {
    let reward = expected_reward(&params.theta, context)?;
    Ok(params.alpha * context.historical_rating + (1.0 - params.alpha) * reward + eta)
}

pub fn emit_feedback<R: Rng + ?Sized>(
    params: &ModelParams,
    context: &ArmContext,
    round: usize,
    rng: &mut R,
) -> Result<Feedback> {
    let sigma = params.sigma_for(context.arm_id)?;
    let z: f64 = rng.sample(StandardNormal);
    let value = feedback_with_noise(params, context, sigma * z)?;
    Ok(Feedback {
        value,
        round,
        arm_id: context.arm_id,
    })
}

pub fn update_history(
    context: &ArmContext,
    feedback: &Feedback,
    policy: HistoryPolicy,
) -> Result<ArmContext> {
    if feedback.arm_id != context.arm_id {
        return Err(Error::ContractViolation(format!(
            "feedback for arm {} applied to arm {}",
            feedback.arm_id, context.arm_id
        )));
    }
    let mut next = context.clone();
    if policy == HistoryPolicy::RunningMean {
        let n = context.rating_count as f64;
        next.historical_rating = (context.historical_rating * n + feedback.value) / (n + 1.0);
        next.rating_count += 1;
    }
    Ok(next)
}

/// One user interacting with a fixed arm set.
#[derive(Debug, Clone)]
pub struct Environment {
    params: ModelParams,
    arms: Vec<ArmContext>,
    history_policy: HistoryPolicy,
}

impl Environment {
    pub fn new(
        params: ModelParams,
        arms: Vec<ArmContext>,
        history_policy: HistoryPolicy,
    ) -> Result<Self> {
        params.validate()?;
        if arms.is_empty() {
            return Err(Error::ContractViolation(
                "environment needs at least one arm".into(),
            ));
        }
        for (i, arm) in arms.iter().enumerate() {
            if arm.arm_id != i {
                return Err(Error::ContractViolation(format!(
                    "arm at position {i} has id {}",
                    arm.arm_id
                )));
            }
            arm.validate(params.dim())?;
        }
        if params.sigma.len() != arms.len() {
            return Err(Error::DimensionMismatch {
                expected: arms.len(),
                actual: params.sigma.len(),
            });
        }
        Ok(Self {
            params,
            arms,
            history_policy,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn arms(&self) -> &[ArmContext] {
        &self.arms
    }

    /// Replaces the feature vectors of every arm, keeping ids and historical ratings.
    pub fn set_features(&mut self, features: Vec<Vec<f64>>) -> Result<()> {
        if features.len() != self.arms.len() {
            return Err(Error::DimensionMismatch {
                expected: self.arms.len(),
                actual: features.len(),
            });
        }
        for (arm, x) in self.arms.iter_mut().zip(features) {
            if x.len() != self.params.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.params.dim(),
                    actual: x.len(),
                });
            }
            arm.features = x;
        }
        Ok(())
    }

    pub fn expected_rewards(&self) -> Vec<f64> {
        self.arms
            .iter()
            .map(|a| dot(&self.params.theta, &a.features))
            .collect()
    }

    /// Emits feedback for `arm_id` and applies the history policy.
    pub fn pull<R: Rng + ?Sized>(
        &mut self,
        arm_id: usize,
        round: usize,
        rng: &mut R,
    ) -> Result<Feedback> {
        let arm = self.arms.get(arm_id).ok_or_else(|| {
            Error::ContractViolation(format!("arm {arm_id} is not in the arm set"))
        })?;
        let feedback = emit_feedback(&self.params, arm, round, rng)?;
        if self.history_policy != HistoryPolicy::Static {
            self.arms[arm_id] = update_history(arm, &feedback, self.history_policy)?;
        }
        Ok(feedback)
    }
}

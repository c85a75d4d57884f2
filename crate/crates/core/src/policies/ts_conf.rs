use rand::RngCore;

use super::{argmax_arm, linear_scores, Policy};
use crate::env::ArmContext;
use crate::error::Result;
use crate::history::{DecisionRecord, History};
use crate::posterior_exact::{recover_params, PosteriorState, Recovery, DEFAULT_EPS_SINGULAR};
use crate::posterior_gibbs::{GibbsConfig, GibbsSampler, GibbsState};

/// Thompson sampling on the exact augmented-parameter posterior.
#[derive(Debug, Clone)]
pub struct TsConf {
    name: String,
    posterior: PosteriorState,
    eps_singular: f64,
    /// When set, the conformity is treated as known and only `(1−α)θ` is learned.
    known_alpha: Option<f64>,
}

impl TsConf {
    /// `θ̃ ~ N(0, I/prior_precision)` over `d + 1` coordinates.
    pub fn new(dim: usize, prior_precision: f64, noise_variance: f64) -> Result<Self> {
        Self::with_posterior(PosteriorState::isotropic(
            dim + 1,
            prior_precision,
            noise_variance,
        )?)
    }

    pub fn with_posterior(posterior: PosteriorState) -> Result<Self> {
        Ok(Self {
            name: "ts-conf".into(),
            posterior,
            eps_singular: DEFAULT_EPS_SINGULAR,
            known_alpha: None,
        })
    }

    /// Variant with the conformity fixed: regresses `V − αh` on `x`.
    pub fn with_known_alpha(
        dim: usize,
        alpha: f64,
        prior_precision: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        Ok(Self {
            name: "ts-conf-known-alpha".into(),
            posterior: PosteriorState::isotropic(dim, prior_precision, noise_variance)?,
            eps_singular: DEFAULT_EPS_SINGULAR,
            known_alpha: Some(alpha),
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_eps_singular(mut self, eps: f64) -> Self {
        self.eps_singular = eps;
        self
    }

    pub fn posterior(&self) -> &PosteriorState {
        &self.posterior
    }

    /// Samples a preference vector from the current posterior.
    pub fn sample_theta<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let draw = self.posterior.sample(rng)?;
        match self.known_alpha {
            Some(_) => Ok(draw.as_slice().to_vec()),
            None => Ok(recover_params(draw.as_slice(), self.eps_singular, Recovery::Clamp)?.1),
        }
    }
}

impl Policy for TsConf {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, offered: &[ArmContext], rng: &mut dyn RngCore) -> Result<usize> {
        let theta = self.sample_theta(rng)?;
        argmax_arm(offered, &linear_scores(&theta, offered)?)
    }

    fn observe(&mut self, record: &DecisionRecord) -> Result<()> {
        match self.known_alpha {
            None => self
                .posterior
                .observe(&record.augmented(), record.feedback_value),
            Some(alpha) => self.posterior.observe(
                &record.features,
                record.feedback_value - alpha * record.historical_rating,
            ),
        }
    }
}

/// Thompson sampling with `Ψ_t` taken from a Gibbs chain over `(θ, α, σ)`.
#[derive(Debug, Clone)]
pub struct TsConfMcmc {
    name: String,
    sampler: GibbsSampler,
    history: History,
    state: GibbsState,
    warm_start: bool,
}

impl TsConfMcmc {
    pub fn new(config: GibbsConfig) -> Result<Self> {
        let sampler = GibbsSampler::new(config)?;
        let state = sampler.initial_state();
        let history = History::new(sampler.config().dim());
        Ok(Self {
            name: format!("ts-conf-mcmc-n{}", sampler.config().n_iterations),
            sampler,
            history,
            state,
            warm_start: true,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Restart every round's chain from the prior centres instead of the previous draw.
    pub fn cold_start(mut self) -> Self {
        self.warm_start = false;
        self
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn last_draw(&self) -> &GibbsState {
        &self.state
    }
}

impl Policy for TsConfMcmc {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, offered: &[ArmContext], rng: &mut dyn RngCore) -> Result<usize> {
        let start = if self.warm_start {
            self.state.clone()
        } else {
            self.sampler.initial_state()
        };
        self.state = self.sampler.run_chain(&self.history, &start, rng)?;
        argmax_arm(offered, &linear_scores(&self.state.theta, offered)?)
    }

    fn observe(&mut self, record: &DecisionRecord) -> Result<()> {
        self.history.push(record.clone())
    }
}

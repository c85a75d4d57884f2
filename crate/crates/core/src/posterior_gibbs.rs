//! Three-stage Gibbs sampler for `p(θ, α, σ | H_t)`.
//!
//! Given the other two blocks every conditional is conjugate:
//!
//! * `θ | α, σ` is a weighted Bayesian linear regression of `V − αh` on `(1−α)x`;
//! * `α | θ, σ` is a scalar regression `V − θᵀx = α (h − θᵀx) + η`,
//!   optionally truncated to `[0, 1]`;
//! * `σ_a² | θ, α` is inverse-gamma per arm, using only that arm's residuals.
//!
//! All three read per-arm sufficient statistics from [`History`], so a sweep
//! costs `O(K d²)` independent of the number of rounds.

use rand::Rng;

use crate::distributions::{inverse_gamma, normal, truncated_normal};
use crate::error::{Error, Result};
use crate::history::{ArmStats, DecisionRecord, History};
use crate::linalg::{
    check_len, check_square, dot, sample_from_precision, spd_cholesky, Matrix, Vector,
};
use crate::posterior_exact::DEFAULT_EPS_SINGULAR;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPrior {
    pub mean: f64,
    /// May be `f64::INFINITY` (flat prior).
    pub variance: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub n_arms: usize,
    pub theta_prior_mean: Vec<f64>,
    pub theta_prior_cov: Matrix,
    pub alpha_prior: AlphaPrior,
    pub sigma_prior: InverseGammaPrior,
    pub eps_singular: f64,
    /// Hold α at this value instead of sampling it.
    pub fixed_alpha: Option<f64>,
    /// Hold σ at these per-arm values instead of sampling them.
    pub fixed_sigma: Option<Vec<f64>>,
}

impl GibbsConfig {
    /// `θ ~ N(0, I)`, `α ~ N(0.5, 1)` truncated to `[0, 1]`, `σ_a² ~ IG(2, 2)`, 100 sweeps.
    pub fn with_defaults(dim: usize, n_arms: usize) -> Self {
        Self {
            n_iterations: 100,
            burn_in: 0,
            n_arms,
            theta_prior_mean: vec![0.0; dim],
            theta_prior_cov: Matrix::identity(dim, dim),
            alpha_prior: AlphaPrior {
                mean: 0.5,
                variance: 1.0,
                truncated: true,
            },
            sigma_prior: InverseGammaPrior {
                shape: 2.0,
                scale: 2.0,
            },
            eps_singular: DEFAULT_EPS_SINGULAR,
            fixed_alpha: None,
            fixed_sigma: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta_prior_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::config("n_iterations", "must be at least 1"));
        }
        if self.burn_in >= self.n_iterations {
            return Err(Error::config(
                "burn_in",
                "must be smaller than n_iterations",
            ));
        }
        if self.n_arms == 0 {
            return Err(Error::config("n_arms", "must be at least 1"));
        }
        check_square(&self.theta_prior_cov, self.dim())?;
        spd_cholesky(&self.theta_prior_cov, "theta prior covariance")?;
        let a = &self.alpha_prior;
        if !a.mean.is_finite() || !(a.variance > 0.0) {
            return Err(Error::config(
                "alpha_prior",
                "needs a finite mean and positive variance",
            ));
        }
        if !a.truncated && !a.variance.is_finite() {
            return Err(Error::config(
                "alpha_prior",
                "a flat prior must be truncated",
            ));
        }
        let s = &self.sigma_prior;
        if !(s.shape > 0.0 && s.scale > 0.0) {
            return Err(Error::config(
                "sigma_prior",
                "shape and scale must be positive",
            ));
        }
        if !(self.eps_singular > 0.0 && self.eps_singular < 1.0) {
            return Err(Error::config("eps_singular", "must lie in (0, 1)"));
        }
        if let Some(alpha) = self.fixed_alpha {
            if !alpha.is_finite() {
                return Err(Error::config("fixed_alpha", "must be finite"));
            }
        }
        if let Some(sigma) = &self.fixed_sigma {
            if sigma.len() != self.n_arms || sigma.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::config(
                    "fixed_sigma",
                    "needs one positive value per arm",
                ));
            }
        }
        Ok(())
    }
}

/// One chain iterate `(θ, α, σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub sigma: Vec<f64>,
}

/// `V − αh − (1−α)θᵀx`
pub fn residual(params: &GibbsState, record: &DecisionRecord) -> f64 {
    record.feedback_value
        - params.alpha * record.historical_rating
        - (1.0 - params.alpha) * dot(&params.theta, &record.features)
}

/// A validated configuration with the θ prior factorized once.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    config: GibbsConfig,
    prior_precision: Matrix,
    prior_weighted_mean: Vector,
}

impl GibbsSampler {
    pub fn new(config: GibbsConfig) -> Result<Self> {
        config.validate()?;
        let prior_precision =
            spd_cholesky(&config.theta_prior_cov, "theta prior covariance")?.inverse();
        let prior_weighted_mean =
            &prior_precision * Vector::from_column_slice(&config.theta_prior_mean);
        Ok(Self {
            config,
            prior_precision,
            prior_weighted_mean,
        })
    }

    pub fn config(&self) -> &GibbsConfig {
        &self.config
    }

    /// Cold-start iterate at the prior centres.
    pub fn initial_state(&self) -> GibbsState {
        let c = &self.config;
        let alpha = c.fixed_alpha.unwrap_or(if c.alpha_prior.truncated {
            c.alpha_prior.mean.clamp(0.0, 1.0)
        } else {
            c.alpha_prior.mean
        });
        let s = &c.sigma_prior;
        let sigma2 = if s.shape > 1.0 {
            s.scale / (s.shape - 1.0)
        } else {
            s.scale / (s.shape + 1.0)
        };
        GibbsState {
            theta: c.theta_prior_mean.clone(),
            alpha,
            sigma: c
                .fixed_sigma
                .clone()
                .unwrap_or_else(|| vec![sigma2.sqrt(); c.n_arms]),
        }
    }

    fn check_state(&self, state: &GibbsState, history: &History) -> Result<()> {
        check_len(&state.theta, self.config.dim())?;
        if history.dim() != self.config.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.config.dim(),
                actual: history.dim(),
            });
        }
        if state.sigma.len() != self.config.n_arms {
            return Err(Error::DimensionMismatch {
                expected: self.config.n_arms,
                actual: state.sigma.len(),
            });
        }
        if let Some((arm, _)) = history
            .pulled_arms()
            .find(|(a, _)| *a >= self.config.n_arms)
        {
            return Err(Error::ContractViolation(format!(
                "history contains arm {arm} but the sampler knows {} arms",
                self.config.n_arms
            )));
        }
        Ok(())
    }

    /// Precision and precision-weighted mean of `θ | α, σ, H`.
    pub fn theta_conditional(
        &self,
        state: &GibbsState,
        history: &History,
    ) -> Result<(Matrix, Vector)> {
        self.check_state(state, history)?;
        let alpha = state.alpha;
        let mut precision = self.prior_precision.clone();
        let mut weighted = self.prior_weighted_mean.clone();
        for (arm, s) in history.pulled_arms() {
            let w = 1.0 / (state.sigma[arm] * state.sigma[arm]);
            let c = w * (1.0 - alpha);
            precision.zip_apply(&s.xx, |p, x| *p += c * (1.0 - alpha) * x);
            weighted.axpy(c, &s.vx, 1.0);
            weighted.axpy(-c * alpha, &s.hx, 1.0);
        }
        Ok((precision, weighted))
    }

    pub fn step_theta<R: Rng + ?Sized>(
        &self,
        state: &GibbsState,
        history: &History,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if 1.0 - state.alpha < self.config.eps_singular {
            // θ drops out of the likelihood at α = 1.
            let chol = spd_cholesky(&self.prior_precision, "theta prior precision")?;
            return Ok(sample_from_precision(&chol, &self.prior_weighted_mean, rng)
                .as_slice()
                .to_vec());
        }
        let (precision, weighted) = self.theta_conditional(state, history)?;
        let chol = spd_cholesky(&precision, "theta conditional precision")?;
        Ok(sample_from_precision(&chol, &weighted, rng)
            .as_slice()
            .to_vec())
    }

    /// Mean and variance of the untruncated Gaussian `α | θ, σ, H`.
    pub fn alpha_conditional(&self, state: &GibbsState, history: &History) -> Result<(f64, f64)> {
        self.check_state(state, history)?;
        let prior = &self.config.alpha_prior;
        let theta = Vector::from_column_slice(&state.theta);
        let mut precision = 1.0 / prior.variance;
        let mut weighted = prior.mean / prior.variance;
        for (arm, s) in history.pulled_arms() {
            let w = 1.0 / (state.sigma[arm] * state.sigma[arm]);
            let quad = theta.dot(&(&s.xx * &theta));
            // Σ (h − u)² and Σ (V − u)(h − u) with u = θᵀx.
            let cov_hh = s.hh - 2.0 * theta.dot(&s.hx) + quad;
            let cov_vh = s.vh - theta.dot(&s.vx) - theta.dot(&s.hx) + quad;
            precision += w * cov_hh.max(0.0);
            weighted += w * cov_vh;
        }
        Ok((weighted / precision, 1.0 / precision))
    }

    pub fn step_alpha<R: Rng + ?Sized>(
        &self,
        state: &GibbsState,
        history: &History,
        rng: &mut R,
    ) -> Result<f64> {
        if let Some(alpha) = self.config.fixed_alpha {
            return Ok(alpha);
        }
        let (mean, var) = self.alpha_conditional(state, history)?;
        if self.config.alpha_prior.truncated {
            Ok(truncated_normal(mean, var.sqrt(), 0.0, 1.0, rng))
        } else {
            normal(mean, var.sqrt(), rng)
        }
    }

    /// Inverse-gamma `(shape, scale)` of `σ_a² | θ, α, H` for one arm.
    pub fn sigma_conditional(
        &self,
        state: &GibbsState,
        history: &History,
        arm_id: usize,
    ) -> (f64, f64) {
        let prior = &self.config.sigma_prior;
        match history.arm_stats(arm_id) {
            None => (prior.shape, prior.scale),
            Some(s) => (
                prior.shape + s.n as f64 / 2.0,
                prior.scale + 0.5 * residual_sum_of_squares(s, &state.theta, state.alpha),
            ),
        }
    }

    pub fn step_sigma<R: Rng + ?Sized>(
        &self,
        state: &GibbsState,
        history: &History,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if let Some(sigma) = &self.config.fixed_sigma {
            return Ok(sigma.clone());
        }
        self.check_state(state, history)?;
        (0..self.config.n_arms)
            .map(|arm| {
                let (shape, scale) = self.sigma_conditional(state, history, arm);
                Ok(inverse_gamma(shape, scale, rng)?.sqrt())
            })
            .collect()
    }

    /// One θ → α → σ sweep.
    pub fn sweep<R: Rng + ?Sized>(
        &self,
        state: &GibbsState,
        history: &History,
        rng: &mut R,
    ) -> Result<GibbsState> {
        let mut next = state.clone();
        next.theta = self.step_theta(&next, history, rng)?;
        next.alpha = self.step_alpha(&next, history, rng)?;
        next.sigma = self.step_sigma(&next, history, rng)?;
        Ok(next)
    }

    /// Runs `n_iterations` sweeps from `start` and returns the last iterate.
    pub fn run_chain<R: Rng + ?Sized>(
        &self,
        history: &History,
        start: &GibbsState,
        rng: &mut R,
    ) -> Result<GibbsState> {
        let mut state = start.clone();
        for _ in 0..self.config.n_iterations {
            state = self.sweep(&state, history, rng)?;
        }
        Ok(state)
    }

    /// Discards `burn_in` sweeps, then keeps every subsequent iterate.
    pub fn draws<R: Rng + ?Sized>(
        &self,
        history: &History,
        start: &GibbsState,
        n_draws: usize,
        rng: &mut R,
    ) -> Result<Vec<GibbsState>> {
        let mut state = start.clone();
        for _ in 0..self.config.burn_in {
            state = self.sweep(&state, history, rng)?;
        }
        let mut out = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            state = self.sweep(&state, history, rng)?;
            out.push(state.clone());
        }
        Ok(out)
    }
}

/// `Σ (V − αh − (1−α)θᵀx)²` over one arm's records, from its sums.
fn residual_sum_of_squares(s: &ArmStats, theta: &[f64], alpha: f64) -> f64 {
    let theta = Vector::from_column_slice(theta);
    let b = 1.0 - alpha;
    let quad = theta.dot(&(&s.xx * &theta));
    let rss = s.vv - 2.0 * alpha * s.vh + alpha * alpha * s.hh
        - 2.0 * b * (theta.dot(&s.vx) - alpha * theta.dot(&s.hx))
        + b * b * quad;
    rss.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior_exact::PosteriorState;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    fn record(arm_id: usize, h: f64, x: Vec<f64>, v: f64) -> DecisionRecord {
        DecisionRecord {
            round: 0,
            arm_id,
            historical_rating: h,
            features: x,
            feedback_value: v,
        }
    }

    fn state(theta: Vec<f64>, alpha: f64, sigma: Vec<f64>) -> GibbsState {
        GibbsState {
            theta,
            alpha,
            sigma,
        }
    }

    #[test]
    fn residual_examples() {
        let r = record(0, 4.0, vec![2.0], 3.0);
        assert_eq!(residual(&state(vec![1.0], 0.5, vec![1.0]), &r), 0.0);
        let r = record(0, 1.0, vec![0.0], 0.0);
        assert_eq!(residual(&state(vec![7.0], 0.0, vec![1.0]), &r), 0.0);
        let r = record(0, 4.0, vec![123.0], 5.0);
        assert_eq!(residual(&state(vec![9.0], 1.0, vec![1.0]), &r), 1.0);
    }

    #[test]
    fn theta_conditional_matches_exact_update() {
        let sampler = GibbsSampler::new(GibbsConfig::with_defaults(2, 1)).unwrap();
        let history = History::from_records(2, [record(0, 3.0, vec![1.0, 0.0], 1.0)]).unwrap();
        let (precision, weighted) = sampler
            .theta_conditional(&state(vec![0.0; 2], 0.0, vec![1.0]), &history)
            .unwrap();
        let cov = precision.clone().try_inverse().unwrap();
        assert_relative_eq!(
            cov,
            Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            &cov * weighted,
            Vector::from_vec(vec![0.5, 0.0]),
            epsilon = 1e-15
        );

        let exact = PosteriorState::isotropic(2, 1.0, 1.0)
            .unwrap()
            .update(&[1.0, 0.0], 1.0)
            .unwrap();
        assert_relative_eq!(exact.precision(), &precision, epsilon = 1e-15);
    }

    #[test]
    fn empty_history_draws_come_from_prior() {
        let mut cfg = GibbsConfig::with_defaults(2, 3);
        cfg.n_iterations = 1;
        let sampler = GibbsSampler::new(cfg).unwrap();
        let history = History::new(2);
        let s0 = sampler.initial_state();
        let (p, w) = sampler.theta_conditional(&s0, &history).unwrap();
        assert_eq!(p, Matrix::identity(2, 2));
        assert_eq!(w, Vector::zeros(2));
        assert_eq!(
            sampler.alpha_conditional(&s0, &history).unwrap(),
            (0.5, 1.0)
        );
        assert_eq!(sampler.sigma_conditional(&s0, &history, 2), (2.0, 2.0));
        let draw = sampler.run_chain(&history, &s0, &mut seeded(1)).unwrap();
        assert!((0.0..=1.0).contains(&draw.alpha));
        assert!(draw.sigma.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn alpha_conditional_recovers_noiseless_alpha() {
        let mut cfg = GibbsConfig::with_defaults(2, 3);
        cfg.alpha_prior.variance = f64::INFINITY;
        let sampler = GibbsSampler::new(cfg).unwrap();
        let theta = vec![0.8, -0.3];
        let alpha_true = 0.7;
        let arms = [
            (1.0, vec![1.0, 2.0]),
            (4.5, vec![0.5, -1.0]),
            (2.0, vec![2.0, 0.1]),
        ];
        let records = (0..12).map(|i| {
            let (h, x) = arms[i % 3].clone();
            let v = alpha_true * h + (1.0 - alpha_true) * dot(&theta, &x);
            record(i % 3, h, x, v)
        });
        let history = History::from_records(2, records).unwrap();
        let (mean, var) = sampler
            .alpha_conditional(&state(theta, 0.1, vec![1.0, 2.0, 0.5]), &history)
            .unwrap();
        assert!((mean - alpha_true).abs() < 1e-8, "{mean}");
        assert!(var > 0.0);
    }

    #[test]
    fn alpha_with_degenerate_covariates_is_prior() {
        let sampler = GibbsSampler::new(GibbsConfig::with_defaults(1, 1)).unwrap();
        // h − θᵀx = 0 on every record.
        let history = History::from_records(
            1,
            [
                record(0, 2.0, vec![2.0], 1.0),
                record(0, 3.0, vec![3.0], 1.0),
            ],
        )
        .unwrap();
        let (mean, var) = sampler
            .alpha_conditional(&state(vec![1.0], 0.3, vec![1.0]), &history)
            .unwrap();
        assert_relative_eq!(mean, 0.5, epsilon = 1e-12);
        assert_relative_eq!(var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn truncated_alpha_draws_in_unit_interval() {
        let sampler = GibbsSampler::new(GibbsConfig::with_defaults(1, 1)).unwrap();
        let history = History::from_records(1, [record(0, 0.0, vec![1.0], 9.0)]).unwrap();
        let mut rng = seeded(4);
        for _ in 0..1000 {
            let a = sampler
                .step_alpha(&state(vec![-5.0], 0.2, vec![0.1]), &history, &mut rng)
                .unwrap();
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn sigma_conditional_parameters() {
        let mut cfg = GibbsConfig::with_defaults(1, 2);
        cfg.sigma_prior = InverseGammaPrior {
            shape: 2.0,
            scale: 1.0,
        };
        let sampler = GibbsSampler::new(cfg).unwrap();
        let s = state(vec![1.0], 0.5, vec![1.0, 1.0]);
        let history = History::from_records(1, [record(0, 4.0, vec![2.0], 3.0)]).unwrap();
        let (shape, scale) = sampler.sigma_conditional(&s, &history, 0);
        assert_relative_eq!(shape, 2.5);
        assert_relative_eq!(scale, 1.0, epsilon = 1e-12);
        assert_eq!(sampler.sigma_conditional(&s, &history, 1), (2.0, 1.0));
    }

    #[test]
    fn rss_from_sums_matches_records() {
        let recs = vec![
            record(0, 4.0, vec![2.0, -1.0], 3.0),
            record(0, 1.5, vec![0.3, 0.8], -0.7),
            record(0, 2.5, vec![1.1, 0.0], 2.2),
        ];
        let history = History::from_records(2, recs.clone()).unwrap();
        let st = state(vec![0.4, -1.2], 0.35, vec![1.0]);
        let direct: f64 = recs.iter().map(|r| residual(&st, r).powi(2)).sum();
        let from_sums = residual_sum_of_squares(history.arm_stats(0).unwrap(), &st.theta, st.alpha);
        assert_relative_eq!(direct, from_sums, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_alpha_skips_likelihood() {
        let sampler = GibbsSampler::new(GibbsConfig::with_defaults(1, 1)).unwrap();
        let history = History::from_records(1, [record(0, 1.0, vec![1.0], 100.0)]).unwrap();
        let mut rng = seeded(3);
        let n = 4000;
        let mean = (0..n)
            .map(|_| {
                sampler
                    .step_theta(&state(vec![0.0], 0.99999, vec![0.01]), &history, &mut rng)
                    .unwrap()[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn chain_is_deterministic() {
        let sampler = GibbsSampler::new(GibbsConfig::with_defaults(2, 2)).unwrap();
        let history = History::from_records(
            2,
            [
                record(0, 3.0, vec![1.0, 0.5], 2.0),
                record(1, 1.0, vec![0.2, 0.9], 0.4),
            ],
        )
        .unwrap();
        let s0 = sampler.initial_state();
        let a = sampler.run_chain(&history, &s0, &mut seeded(12)).unwrap();
        let b = sampler.run_chain(&history, &s0, &mut seeded(12)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let mut cfg = GibbsConfig::with_defaults(2, 2);
        cfg.burn_in = 100;
        assert!(GibbsSampler::new(cfg).is_err());
        let mut cfg = GibbsConfig::with_defaults(2, 2);
        cfg.theta_prior_cov = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GibbsSampler::new(cfg).is_err());
    }
}

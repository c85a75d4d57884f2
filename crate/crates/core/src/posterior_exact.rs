//! Exact Gaussian posterior over the augmented parameter.
//!
//! Rewriting the biased feedback as `V = x̃ᵀθ̃ + η` with `x̃ = [h; x]` and
//! `θ̃ = [α; (1−α)θ]` makes the model linear, so with a Gaussian prior
//! `θ̃ ~ N(μ, Λ⁻¹)` and known noise variance `σ_n²` the posterior is
//!
//! ```text
//!   Σ_t = (Λ + σ_n⁻² Σ x̃ x̃ᵀ)⁻¹
//!   μ_t = Σ_t (σ_n⁻² Σ V x̃ + Λ μ)
//! ```
//!
//! The state keeps the precision matrix and the precision-weighted mean and
//! only factorizes when a mean, covariance or sample is requested.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_len, check_square, sample_from_precision, spd_cholesky, Matrix, Vector};

pub const DEFAULT_EPS_SINGULAR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    prior_mean: Vector,
    prior_precision: Matrix,
    noise_variance: f64,
    precision: Matrix,
    /// `σ_n⁻² Σ V x̃ + Λ μ`
    weighted_sum: Vector,
    n_obs: usize,
}

impl PosteriorState {
    pub fn init(
        prior_mean: Vec<f64>,
        prior_precision: Matrix,
        noise_variance: f64,
    ) -> Result<Self> {
        let dim = prior_mean.len();
        if dim == 0 {
            return Err(Error::ContractViolation(
                "posterior dimension must be at least 1".into(),
            ));
        }
        check_square(&prior_precision, dim)?;
        spd_cholesky(&prior_precision, "prior precision")?;
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::ContractViolation(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        let prior_mean = Vector::from_vec(prior_mean);
        let weighted_sum = &prior_precision * &prior_mean;
        Ok(Self {
            precision: prior_precision.clone(),
            prior_mean,
            prior_precision,
            noise_variance,
            weighted_sum,
            n_obs: 0,
        })
    }

    /// `N(0, I/scale)` prior, the usual starting point.
    pub fn isotropic(dim: usize, prior_precision: f64, noise_variance: f64) -> Result<Self> {
        Self::init(
            vec![0.0; dim],
            Matrix::identity(dim, dim) * prior_precision,
            noise_variance,
        )
    }

    pub fn dim(&self) -> usize {
        self.prior_mean.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn prior_mean(&self) -> &Vector {
        &self.prior_mean
    }

    pub fn prior_precision(&self) -> &Matrix {
        &self.prior_precision
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    /// Rank-one precision update with one `(x̃, V)` observation.
    pub fn observe(&mut self, feature: &[f64], feedback_value: f64) -> Result<()> {
        check_len(feature, self.dim())?;
        if !feedback_value.is_finite() || feature.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation("non-finite observation".into()));
        }
        let x = Vector::from_column_slice(feature);
        let w = 1.0 / self.noise_variance;
        self.precision.ger(w, &x, &x, 1.0);
        self.weighted_sum.axpy(w * feedback_value, &x, 1.0);
        self.n_obs += 1;
        Ok(())
    }

    pub fn update(&self, feature: &[f64], feedback_value: f64) -> Result<Self> {
        let mut next = self.clone();
        next.observe(feature, feedback_value)?;
        Ok(next)
    }

    fn factor(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        spd_cholesky(
            &self.precision,
            &format!("posterior precision after {} observations", self.n_obs),
        )
    }

    pub fn mean(&self) -> Result<Vector> {
        Ok(self.factor()?.solve(&self.weighted_sum))
    }

    pub fn covariance(&self) -> Result<Matrix> {
        Ok(self.factor()?.inverse())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        let chol = self.factor()?;
        Ok(sample_from_precision(&chol, &self.weighted_sum, rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recovery {
    /// Clamp `θ̃₁` into `[0, 1 − ε]` before dividing.
    #[default]
    Clamp,
    /// Refuse to recover when `θ̃₁ ≥ 1 − ε`.
    Strict,
}

/// Splits `θ̃ = [α; (1−α)θ]` back into `(α, θ)`.
pub fn recover_params(
    theta_tilde: &[f64],
    eps_singular: f64,
    mode: Recovery,
) -> Result<(f64, Vec<f64>)> {
    let (&first, rest) = theta_tilde
        .split_first()
        .ok_or_else(|| Error::ContractViolation("augmented parameter is empty".into()))?;
    let ceiling = 1.0 - eps_singular;
    let alpha = match mode {
        Recovery::Clamp => first.clamp(0.0, ceiling),
        Recovery::Strict if first >= ceiling || !first.is_finite() => {
            return Err(Error::Singular {
                value: first,
                eps: eps_singular,
            })
        }
        Recovery::Strict => first,
    };
    let scale = 1.0 - alpha;
    Ok((alpha, rest.iter().map(|v| v / scale).collect()))
}

/// Inverse of [`recover_params`]: `[α; (1−α)θ]`.
pub fn embed_params(alpha: f64, theta: &[f64]) -> Vec<f64> {
    std::iter::once(alpha)
        .chain(theta.iter().map(|v| (1.0 - alpha) * v))
        .collect()
}

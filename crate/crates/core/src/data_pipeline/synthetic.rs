use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::env::{ArmContext, ModelParams, RATING_MAX, RATING_MIN};
use crate::error::{Error, Result};

/// Per-coordinate mean of synthetic features and preference vectors.
pub const FEATURE_MEAN: f64 = 0.5;
/// Per-coordinate variance (diagonal covariance) of synthetic features and preference vectors.
pub const FEATURE_VARIANCE: f64 = 1.0 / 6.0;

fn feature_dist() -> Normal<f64> {
    Normal::new(FEATURE_MEAN, FEATURE_VARIANCE.sqrt()).expect("valid normal")
}

/// `K` feature vectors drawn i.i.d. from `N(½·1, I/6)`.
pub fn draw_features<R: Rng + ?Sized>(dim: usize, n_arms: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let dist = feature_dist();
    (0..n_arms)
        .map(|_| (0..dim).map(|_| dist.sample(rng)).collect())
        .collect()
}

/// Draws a synthetic instance: `θ, x_a ~ N(½·1, I/6)`, `α ~ U[0, 1]`,
/// `h_a ~ U[0, 5]`, shared noise variance.
///
/// Draw order is θ, α, then `(x_a, h_a)` per arm.
pub fn generate_synthetic<R: Rng + ?Sized>(
    dim: usize,
    n_arms: usize,
    noise_variance: f64,
    rng: &mut R,
) -> Result<(ModelParams, Vec<ArmContext>)> {
    if dim == 0 || n_arms == 0 {
        return Err(Error::config("dimension/n_arms", "must be at least 1"));
    }
    let dist = feature_dist();
    let theta: Vec<f64> = (0..dim).map(|_| dist.sample(rng)).collect();
    let alpha = rng.random_range(0.0..=1.0);
    let arms = (0..n_arms)
        .map(|arm_id| {
            let features = (0..dim).map(|_| dist.sample(rng)).collect();
            let h = rng.random_range(RATING_MIN..=RATING_MAX);
            ArmContext::new(arm_id, features, h)
        })
        .collect();
    let params = ModelParams::with_shared_noise(theta, alpha, noise_variance, n_arms)?;
    Ok((params, arms))
}

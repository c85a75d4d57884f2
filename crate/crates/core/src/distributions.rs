//! Scalar samplers used by the Gibbs conditionals.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn std_normal() -> Normal {
    Normal::standard()
}

/// Draws from `N(mean, sd²)` restricted to `[lo, hi]` by inverse-CDF.
///
/// Intervals in the upper tail are reflected into the lower tail, where the
/// CDF keeps relative precision. If the interval carries no representable
/// mass the bound closest to the mean is returned.
pub fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    debug_assert!(lo < hi);
    if !sd.is_finite() {
        return rng.random_range(lo..=hi);
    }
    if sd == 0.0 {
        return mean.clamp(lo, hi);
    }
    let mut a = (lo - mean) / sd;
    let mut b = (hi - mean) / sd;
    let reflect = a > 0.0;
    if reflect {
        (a, b) = (-b, -a);
    }
    let n = std_normal();
    let (pa, pb) = (n.cdf(a), n.cdf(b));
    let z = if pb - pa > 0.0 && pb > 0.0 {
        let u: f64 = rng.random();
        n.inverse_cdf(pa + u * (pb - pa)).clamp(a, b)
    } else {
        b
    };
    let z = if reflect { -z } else { z };
    (mean + sd * z).clamp(lo, hi)
}

pub fn normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> Result<f64> {
    if !sd.is_finite() || !mean.is_finite() {
        return Err(Error::ContractViolation(format!(
            "cannot draw from an improper normal (mean {mean}, sd {sd})"
        )));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + sd * z)
}

/// Draws `X ~ InverseGamma(shape, scale)`, i.e. `1/X ~ Gamma(shape, rate = scale)`.
pub fn inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let gamma = Gamma::new(shape, 1.0 / scale).map_err(|e| {
        Error::ContractViolation(format!("invalid inverse-gamma({shape}, {scale}): {e}"))
    })?;
    Ok(1.0 / gamma.sample(rng))
}

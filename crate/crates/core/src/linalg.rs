//! Small dense linear-algebra helpers shared by the posterior modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub const SYMMETRY_TOL: f64 = 1e-9;

pub fn check_square(m: &Matrix, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if m.nrows() != n { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

pub fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: v.len(),
        });
    }
    Ok(())
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn spd_cholesky(m: &Matrix, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} is not symmetric"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has non-finite entries"
        )));
    }
    Cholesky::new(m.clone()).ok_or_else(|| {
        let min_diag = m.diagonal().min();
        Error::NotPositiveDefinite(format!(
            "{what} ({n}x{n}) failed Cholesky factorization; smallest diagonal entry {min_diag:e}",
            n = m.nrows()
        ))
    })
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws from `N(P^{-1} b, P^{-1})` given the Cholesky factor `P = L L^T`.
///
/// With `z ~ N(0, I)`, `L^T w = z` gives `w ~ N(0, P^{-1})`.
pub fn sample_from_precision<R: Rng + ?Sized>(
    chol: &Cholesky<f64, Dyn>,
    precision_weighted_mean: &Vector,
    rng: &mut R,
) -> Vector {
    let mean = chol.solve(precision_weighted_mean);
    let z = standard_normal_vector(mean.len(), rng);
    let w = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    mean + w
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

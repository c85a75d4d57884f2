#![allow(dead_code)]

use rand::Rng;

/// Dense row-major inverse by Gauss-Jordan with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// Batch conjugate Bayesian linear regression: returns (mean, covariance).
pub fn batch_posterior(
    prior_mean: &[f64],
    prior_precision: &[Vec<f64>],
    noise_variance: f64,
    xs: &[Vec<f64>],
    vs: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = prior_mean.len();
    let mut prec = prior_precision.to_vec();
    let mut rhs = mat_vec(prior_precision, prior_mean);
    for (x, v) in xs.iter().zip(vs) {
        for i in 0..n {
            rhs[i] += x[i] * v / noise_variance;
            for j in 0..n {
                prec[i][j] += x[i] * x[j] / noise_variance;
            }
        }
    }
    let cov = invert(&prec);
    (mat_vec(&cov, &rhs), cov)
}

pub fn frobenius(a: &[Vec<f64>], b: &nalgebra::DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            s += (v - b[(i, j)]).powi(2);
        }
    }
    s.sqrt()
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn random_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

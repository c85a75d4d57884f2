mod common;

use common::{batch_posterior, mean_var, random_vec};
use herdbandit::history::{DecisionRecord, History};
use herdbandit::posterior_exact::PosteriorState;
use herdbandit::posterior_gibbs::{GibbsConfig, GibbsSampler, GibbsState};
use herdbandit::rng::seeded;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

const N: usize = 10_000;

fn within(sample: f64, exact: f64, sd: f64, n: usize) -> bool {
    (sample - exact).abs() < 4.0 * sd / (n as f64).sqrt()
}

fn records(
    rng: &mut impl Rng,
    dim: usize,
    n_arms: usize,
    n: usize,
    state: &GibbsState,
) -> Vec<DecisionRecord> {
    let arms: Vec<(Vec<f64>, f64)> = (0..n_arms)
        .map(|_| (random_vec(dim, rng), rng.random_range(0.0..5.0)))
        .collect();
    (0..n)
        .map(|t| {
            let a = t % n_arms;
            let (x, h) = arms[a].clone();
            let u: f64 = x.iter().zip(&state.theta).map(|(p, q)| p * q).sum();
            let eta: f64 = rng.sample(StandardNormal);
            DecisionRecord {
                round: t + 1,
                arm_id: a,
                historical_rating: h,
                features: x,
                feedback_value: state.alpha * h + (1.0 - state.alpha) * u + state.sigma[a] * eta,
            }
        })
        .collect()
}

fn truth() -> GibbsState {
    GibbsState {
        theta: vec![0.4, -0.2, 0.7],
        alpha: 0.35,
        sigma: vec![0.8, 1.0, 1.3, 0.6],
    }
}

#[test]
fn theta_draws_match_weighted_regression() {
    let mut rng = seeded(31);
    let state = truth();
    let recs = records(&mut rng, 3, 4, 40, &state);
    let hist = History::from_records(3, recs.clone()).unwrap();
    let sampler = GibbsSampler::new(GibbsConfig::with_defaults(3, 4)).unwrap();

    // Whitened regression of V − αh on (1−α)x, one row per record.
    let a = state.alpha;
    let xs: Vec<Vec<f64>> = recs
        .iter()
        .map(|r| {
            r.features
                .iter()
                .map(|v| (1.0 - a) * v / state.sigma[r.arm_id])
                .collect()
        })
        .collect();
    let vs: Vec<f64> = recs
        .iter()
        .map(|r| (r.feedback_value - a * r.historical_rating) / state.sigma[r.arm_id])
        .collect();
    let ident: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| f64::from(i == j)).collect())
        .collect();
    let (mean, cov) = batch_posterior(&[0.0; 3], &ident, 1.0, &xs, &vs);

    let draws: Vec<Vec<f64>> = (0..N)
        .map(|_| sampler.step_theta(&state, &hist, &mut rng).unwrap())
        .collect();
    for k in 0..3 {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let (m, v) = mean_var(&col);
        let sd = cov[k][k].sqrt();
        assert!(within(m, mean[k], sd, N), "coord {k}: {m} vs {}", mean[k]);
        // Var of the sample variance is about 2σ⁴/n.
        assert!(
            within(v, cov[k][k], cov[k][k] * 2f64.sqrt(), N),
            "coord {k}: {v} vs {}",
            cov[k][k]
        );
    }
}

/// Mean and variance of N(m, s²) truncated to [0, 1] by Simpson quadrature.
fn truncated_moments(m: f64, s: f64) -> (f64, f64) {
    let n = 20_000;
    let h = 1.0 / n as f64;
    let (mut z, mut z1, mut z2) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let x = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = w * (-0.5 * ((x - m) / s).powi(2)).exp();
        z += f;
        z1 += f * x;
        z2 += f * x * x;
    }
    let mean = z1 / z;
    (mean, z2 / z - mean * mean)
}

#[test]
fn alpha_draws_match_truncated_scalar_regression() {
    let mut rng = seeded(32);
    let state = truth();
    let recs = records(&mut rng, 3, 4, 6, &state);
    let hist = History::from_records(3, recs.clone()).unwrap();
    let sampler = GibbsSampler::new(GibbsConfig::with_defaults(3, 4)).unwrap();

    let (mut prec, mut weighted) = (1.0, 0.5);
    for r in &recs {
        let u: f64 = r
            .features
            .iter()
            .zip(&state.theta)
            .map(|(p, q)| p * q)
            .sum();
        let w = 1.0 / state.sigma[r.arm_id].powi(2);
        prec += w * (r.historical_rating - u).powi(2);
        weighted += w * (r.historical_rating - u) * (r.feedback_value - u);
    }
    let (m, v) = sampler.alpha_conditional(&state, &hist).unwrap();
    assert!((m - weighted / prec).abs() < 1e-10 && (v - 1.0 / prec).abs() < 1e-12);

    let (tm, tv) = truncated_moments(weighted / prec, (1.0 / prec).sqrt());
    let draws: Vec<f64> = (0..N)
        .map(|_| sampler.step_alpha(&state, &hist, &mut rng).unwrap())
        .collect();
    assert!(draws.iter().all(|a| (0.0..=1.0).contains(a)));
    let (sm, sv) = mean_var(&draws);
    assert!(within(sm, tm, tv.sqrt(), N), "{sm} vs {tm}");
    assert!(within(sv, tv, tv * 2f64.sqrt(), N), "{sv} vs {tv}");
}

#[test]
fn sigma_draws_match_inverse_gamma() {
    let mut rng = seeded(33);
    let state = truth();
    let recs = records(&mut rng, 3, 4, 60, &state);
    let hist = History::from_records(3, recs.clone()).unwrap();
    let sampler = GibbsSampler::new(GibbsConfig::with_defaults(3, 4)).unwrap();
    for arm in 0..4 {
        let mine: Vec<&DecisionRecord> = recs.iter().filter(|r| r.arm_id == arm).collect();
        let rss: f64 = mine
            .iter()
            .map(|r| {
                let u: f64 = r
                    .features
                    .iter()
                    .zip(&state.theta)
                    .map(|(p, q)| p * q)
                    .sum();
                (r.feedback_value - state.alpha * r.historical_rating - (1.0 - state.alpha) * u)
                    .powi(2)
            })
            .sum();
        let (shape, scale) = (2.0 + mine.len() as f64 / 2.0, 2.0 + rss / 2.0);
        let (a, b) = sampler.sigma_conditional(&state, &hist, arm);
        assert!((a - shape).abs() < 1e-12 && (b - scale).abs() < 1e-9);

        let mean = scale / (shape - 1.0);
        let var = mean * mean / (shape - 2.0);
        let draws: Vec<f64> = (0..N)
            .map(|_| sampler.step_sigma(&state, &hist, &mut rng).unwrap()[arm].powi(2))
            .collect();
        let (sm, _) = mean_var(&draws);
        assert!(within(sm, mean, var.sqrt(), N), "arm {arm}: {sm} vs {mean}");
    }
}

#[test]
fn sigma_conditional_ignores_other_arms() {
    let mut rng = seeded(34);
    let state = truth();
    let mut recs = records(&mut rng, 3, 4, 40, &state);
    let sampler = GibbsSampler::new(GibbsConfig::with_defaults(3, 4)).unwrap();
    let before =
        sampler.sigma_conditional(&state, &History::from_records(3, recs.clone()).unwrap(), 2);
    // Perturb and permute every record not belonging to arm 2, in place.
    let slots: Vec<usize> = (0..recs.len()).filter(|&i| recs[i].arm_id != 2).collect();
    let mut others: Vec<DecisionRecord> = slots.iter().map(|&i| recs[i].clone()).collect();
    for r in &mut others {
        r.feedback_value += rng.random_range(-3.0..3.0);
    }
    others.shuffle(&mut rng);
    for (&i, r) in slots.iter().zip(others) {
        recs[i] = r;
    }
    let after = sampler.sigma_conditional(&state, &History::from_records(3, recs).unwrap(), 2);
    assert_eq!(before, after);
}

#[test]
fn sweeps_keep_parameters_valid() {
    let mut rng = seeded(35);
    let state = truth();
    let hist = History::from_records(3, records(&mut rng, 3, 4, 30, &state)).unwrap();
    let sampler = GibbsSampler::new(GibbsConfig::with_defaults(3, 4)).unwrap();
    let mut s = sampler.initial_state();
    for _ in 0..500 {
        s = sampler.sweep(&s, &hist, &mut rng).unwrap();
        assert!((0.0..=1.0).contains(&s.alpha));
        assert!(s.sigma.iter().all(|v| *v > 0.0 && v.is_finite()));
        assert!(s.theta.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn fixed_alpha_and_sigma_reduce_to_exact_posterior() {
    let mut rng = seeded(36);
    let state = GibbsState {
        theta: vec![0.5, 0.1, -0.3],
        alpha: 0.4,
        sigma: vec![1.0; 3],
    };
    let recs = records(&mut rng, 3, 3, 30, &state);
    let hist = History::from_records(3, recs.clone()).unwrap();
    let mut cfg = GibbsConfig::with_defaults(3, 3);
    cfg.fixed_alpha = Some(0.4);
    cfg.fixed_sigma = Some(vec![1.0; 3]);
    cfg.burn_in = 50;
    let sampler = GibbsSampler::new(cfg).unwrap();

    let mut exact = PosteriorState::isotropic(3, 1.0, 1.0).unwrap();
    for r in &recs {
        let x: Vec<f64> = r.features.iter().map(|v| 0.6 * v).collect();
        exact
            .observe(&x, r.feedback_value - 0.4 * r.historical_rating)
            .unwrap();
    }
    let mean = exact.mean().unwrap();
    let cov = exact.covariance().unwrap();
    let n = 2000;
    let draws = sampler
        .draws(&hist, &sampler.initial_state(), n, &mut rng)
        .unwrap();
    for k in 0..3 {
        let col: Vec<f64> = draws.iter().map(|d| d.theta[k]).collect();
        let (m, _) = mean_var(&col);
        assert!(within(m, mean[k], cov[(k, k)].sqrt(), n), "coord {k}");
    }
}

/// Forward draw of (θ, α, σ) from the default priors.
fn prior_draw(rng: &mut impl Rng, dim: usize, n_arms: usize) -> GibbsState {
    let theta = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let alpha = loop {
        let a = 0.5 + rng.sample::<f64, _>(StandardNormal);
        if (0.0..=1.0).contains(&a) {
            break a;
        }
    };
    let gamma = Gamma::new(2.0, 0.5).unwrap();
    let sigma = (0..n_arms)
        .map(|_| (1.0f64 / gamma.sample(rng)).sqrt())
        .collect();
    GibbsState {
        theta,
        alpha,
        sigma,
    }
}

struct Design {
    arms: Vec<(Vec<f64>, f64)>,
    pulls: Vec<usize>,
}

impl Design {
    fn simulate(&self, s: &GibbsState, rng: &mut impl Rng) -> History {
        let recs = self.pulls.iter().enumerate().map(|(t, &a)| {
            let (x, h) = &self.arms[a];
            let u: f64 = x.iter().zip(&s.theta).map(|(p, q)| p * q).sum();
            let eta: f64 = rng.sample(StandardNormal);
            DecisionRecord {
                round: t + 1,
                arm_id: a,
                historical_rating: *h,
                features: x.clone(),
                feedback_value: s.alpha * h + (1.0 - s.alpha) * u + s.sigma[a] * eta,
            }
        });
        History::from_records(2, recs).unwrap()
    }
}

/// Batch-means standard error of the mean of an autocorrelated series.
fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs
        .chunks(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let (_, v) = mean_var(&means);
    (v / batches as f64).sqrt()
}

#[test]
fn geweke_joint_distribution_check() {
    let (dim, n_arms, rounds) = (2, 5, 20);
    let mut rng = seeded(37);
    let design = Design {
        arms: (0..n_arms)
            .map(|_| (random_vec(dim, &mut rng), rng.random_range(0.0..5.0)))
            .collect(),
        pulls: (0..rounds).map(|t| t % n_arms).collect(),
    };
    let sampler = GibbsSampler::new(GibbsConfig::with_defaults(dim, n_arms)).unwrap();
    let m = 40_000;

    let forward: Vec<f64> = (0..m)
        .map(|_| prior_draw(&mut rng, dim, n_arms).alpha)
        .collect();

    let mut state = prior_draw(&mut rng, dim, n_arms);
    let mut hist = design.simulate(&state, &mut rng);
    let mut successive = Vec::with_capacity(m);
    for _ in 0..m {
        state = sampler.sweep(&state, &hist, &mut rng).unwrap();
        hist = design.simulate(&state, &mut rng);
        successive.push(state.alpha);
    }

    let (fm, fv) = mean_var(&forward);
    let (sm, sv) = mean_var(&successive);
    let se = ((fv / m as f64) + batch_se(&successive, 50).powi(2)).sqrt();
    assert!(
        (fm - sm).abs() < 4.0 * se,
        "alpha mean: forward {fm} vs chain {sm} (se {se})"
    );
    let sq: Vec<f64> = successive.iter().map(|a| a * a).collect();
    let fsq: Vec<f64> = forward.iter().map(|a| a * a).collect();
    let (fsm, fsv) = mean_var(&fsq);
    let (ssm, _) = mean_var(&sq);
    let se2 = ((fsv / m as f64) + batch_se(&sq, 50).powi(2)).sqrt();
    assert!(
        (fsm - ssm).abs() < 4.0 * se2,
        "alpha second moment: {fsm} vs {ssm}"
    );
    assert!((fv - sv).abs() < 0.1 * fv);
}

//! Matrix factorization with a global conformity weight.
//!
//! ```text
//!   r̂_ui = (1 − s)·θ_uᵀx_i + s·r*_i,    s = sigmoid(β)
//!   L = Σ (r̂_ui − r_ui)² + λ (Σ_u ‖θ_u‖² + Σ_i ‖x_i‖²)
//! ```
//!
//! Trained by SGD. Each rating carries `λ/n_u` and `λ/n_i` of the penalty so
//! one epoch's stochastic gradients sum to the full gradient. An epoch whose
//! loss rises is rolled back and the learning rate halved.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::instance::{BanditInstance, InstanceSource};
use super::ratings::{historical_scores, RatingsDataset};
use crate::env::{ArmContext, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Latent dimensions used for real-data instances.
pub const SUPPORTED_DIMENSIONS: [usize; 4] = [5, 10, 15, 20];

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfHyper {
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    /// Standard deviation of the initial factor entries.
    pub init_scale: f64,
    pub initial_beta: f64,
}

impl Default for MfHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            regularization: 0.05,
            epochs: 30,
            init_scale: 0.1,
            initial_beta: 0.0,
        }
    }
}

impl MfHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::config("regularization", "must be non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::config("init_scale", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfModel {
    pub users: Vec<String>,
    pub items: Vec<String>,
    /// `users × d`
    pub user_features: Vec<Vec<f64>>,
    /// `items × d`
    pub item_features: Vec<Vec<f64>>,
    pub beta: f64,
    /// `r*_i`, parallel to `items`.
    pub item_historical: Vec<f64>,
    /// Ratings per item in the training data, parallel to `items`.
    pub item_counts: Vec<usize>,
    /// Loss after each accepted epoch.
    pub loss_history: Vec<f64>,
}

/// Gradient of [`MfModel::loss`] with the same layout as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct MfGradient {
    pub user_features: Vec<Vec<f64>>,
    pub item_features: Vec<Vec<f64>>,
    pub beta: f64,
}

/// Ratings re-keyed by dense user/item indices.
#[derive(Debug, Clone)]
struct Indexed {
    entries: Vec<(usize, usize, f64)>,
    user_counts: Vec<usize>,
    item_counts: Vec<usize>,
}

impl MfModel {
    pub fn dim(&self) -> usize {
        self.user_features.first().map_or(0, Vec::len)
    }

    pub fn conformity(&self) -> f64 {
        sigmoid(self.beta)
    }

    fn user_index(&self) -> BTreeMap<&str, usize> {
        self.users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect()
    }

    fn item_index(&self) -> BTreeMap<&str, usize> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect()
    }

    fn predict_idx(&self, u: usize, i: usize) -> f64 {
        let s = self.conformity();
        (1.0 - s) * dot(&self.user_features[u], &self.item_features[i])
            + s * self.item_historical[i]
    }

    pub fn predict(&self, user_id: &str, item_id: &str) -> Option<f64> {
        let u = *self.user_index().get(user_id)?;
        let i = *self.item_index().get(item_id)?;
        Some(self.predict_idx(u, i))
    }

    fn index(&self, data: &RatingsDataset) -> Result<Indexed> {
        let users = self.user_index();
        let items = self.item_index();
        let mut entries = Vec::with_capacity(data.len());
        let mut user_counts = vec![0; self.users.len()];
        let mut item_counts = vec![0; self.items.len()];
        for r in &data.ratings {
            let u = *users
                .get(r.user_id.as_str())
                .ok_or_else(|| Error::UnknownUser(r.user_id.clone()))?;
            let i = *items.get(r.item_id.as_str()).ok_or_else(|| {
                Error::ContractViolation(format!("item `{}` is not in the model", r.item_id))
            })?;
            user_counts[u] += 1;
            item_counts[i] += 1;
            entries.push((u, i, r.rating));
        }
        Ok(Indexed {
            entries,
            user_counts,
            item_counts,
        })
    }

    fn penalty(&self, reg: f64) -> f64 {
        let sq = |rows: &[Vec<f64>]| rows.iter().map(|r| dot(r, r)).sum::<f64>();
        reg * (sq(&self.user_features) + sq(&self.item_features))
    }

    fn loss_indexed(&self, data: &Indexed, reg: f64) -> f64 {
        let sse: f64 = data
            .entries
            .iter()
            .map(|&(u, i, r)| (self.predict_idx(u, i) - r).powi(2))
            .sum();
        sse + self.penalty(reg)
    }

    /// Squared error plus the ridge penalty on all factors.
    pub fn loss(&self, data: &RatingsDataset, regularization: f64) -> Result<f64> {
        Ok(self.loss_indexed(&self.index(data)?, regularization))
    }

    /// Mean squared prediction error, no penalty.
    pub fn mse(&self, data: &RatingsDataset) -> Result<f64> {
        let idx = self.index(data)?;
        Ok(self.loss_indexed(&idx, 0.0) / idx.entries.len().max(1) as f64)
    }

    pub fn gradient(&self, data: &RatingsDataset, regularization: f64) -> Result<MfGradient> {
        let idx = self.index(data)?;
        let s = self.conformity();
        let mut g = MfGradient {
            user_features: self
                .user_features
                .iter()
                .map(|r| r.iter().map(|v| 2.0 * regularization * v).collect())
                .collect(),
            item_features: self
                .item_features
                .iter()
                .map(|r| r.iter().map(|v| 2.0 * regularization * v).collect())
                .collect(),
            beta: 0.0,
        };
        for &(u, i, r) in &idx.entries {
            let (tu, xi) = (&self.user_features[u], &self.item_features[i]);
            let pref = dot(tu, xi);
            let err = (1.0 - s) * pref + s * self.item_historical[i] - r;
            for k in 0..tu.len() {
                g.user_features[u][k] += 2.0 * err * (1.0 - s) * xi[k];
                g.item_features[i][k] += 2.0 * err * (1.0 - s) * tu[k];
            }
            g.beta += 2.0 * err * s * (1.0 - s) * (self.item_historical[i] - pref);
        }
        Ok(g)
    }

    fn sgd_epoch<R: Rng + ?Sized>(
        &mut self,
        data: &Indexed,
        order: &mut [usize],
        lr: f64,
        reg: f64,
        rng: &mut R,
    ) {
        order.shuffle(rng);
        for &e in order.iter() {
            let (u, i, r) = data.entries[e];
            let s = self.conformity();
            let pref = dot(&self.user_features[u], &self.item_features[i]);
            let err = (1.0 - s) * pref + s * self.item_historical[i] - r;
            let reg_u = reg / data.user_counts[u] as f64;
            let reg_i = reg / data.item_counts[i] as f64;
            for k in 0..self.user_features[u].len() {
                let tu = self.user_features[u][k];
                let xi = self.item_features[i][k];
                self.user_features[u][k] -= lr * (2.0 * err * (1.0 - s) * xi + 2.0 * reg_u * tu);
                self.item_features[i][k] -= lr * (2.0 * err * (1.0 - s) * tu + 2.0 * reg_i * xi);
            }
            self.beta -= lr * 2.0 * err * s * (1.0 - s) * (self.item_historical[i] - pref);
        }
    }
}

/// Fits the model with `r*_i` taken as each item's mean rating in `data`.
pub fn fit_mf<R: Rng + ?Sized>(
    data: &RatingsDataset,
    dim: usize,
    hyper: &MfHyper,
    rng: &mut R,
) -> Result<MfModel> {
    fit_mf_with_historical(data, &historical_scores(data), dim, hyper, rng)
}

/// Fits the model against caller-supplied historical scores.
pub fn fit_mf_with_historical<R: Rng + ?Sized>(
    data: &RatingsDataset,
    historical: &BTreeMap<String, f64>,
    dim: usize,
    hyper: &MfHyper,
    rng: &mut R,
) -> Result<MfModel> {
    hyper.validate()?;
    if dim == 0 {
        return Err(Error::config("dimension", "must be at least 1"));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset { min_count: 0 });
    }
    let users: Vec<String> = data.user_counts().keys().map(|s| s.to_string()).collect();
    let item_counts_map = data.item_counts();
    let items: Vec<String> = item_counts_map.keys().map(|s| s.to_string()).collect();
    let item_historical = items
        .iter()
        .map(|i| {
            historical.get(i).copied().ok_or_else(|| {
                Error::ContractViolation(format!("no historical score for item `{i}`"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let init = Normal::new(0.0, hyper.init_scale)
        .map_err(|e| Error::config("init_scale", e.to_string()))?;
    let mut draw = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| init.sample(rng)).collect())
            .collect()
    };
    let user_features = draw(users.len());
    let item_features = draw(items.len());
    let mut model = MfModel {
        item_counts: items.iter().map(|i| item_counts_map[i.as_str()]).collect(),
        users,
        items,
        user_features,
        item_features,
        beta: hyper.initial_beta,
        item_historical,
        loss_history: Vec::new(),
    };

    let idx = model.index(data)?;
    let mut order: Vec<usize> = (0..idx.entries.len()).collect();
    let mut lr = hyper.learning_rate;
    let mut loss = model.loss_indexed(&idx, hyper.regularization);
    model.loss_history.push(loss);
    for _ in 0..hyper.epochs {
        let snapshot = model.clone();
        model.sgd_epoch(&idx, &mut order, lr, hyper.regularization, rng);
        let next = model.loss_indexed(&idx, hyper.regularization);
        if !next.is_finite() {
            return Err(Error::Divergence {
                hyperparameter: "learning_rate",
                loss: next,
            });
        }
        if next > loss + 1e-6 {
            model = snapshot;
            lr *= 0.5;
            continue;
        }
        loss = next;
        model.loss_history.push(loss);
    }
    Ok(model)
}

/// Builds a bandit instance for one user over the `k` most-rated items
/// (ties broken by item id).
pub fn to_bandit_instance(
    model: &MfModel,
    user_id: &str,
    noise_variance: f64,
    k: usize,
) -> Result<BanditInstance> {
    let u = *model
        .user_index()
        .get(user_id)
        .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
    if k == 0 || k > model.items.len() {
        return Err(Error::config(
            "n_arms",
            format!(
                "requested {k} arms but the model has {} items",
                model.items.len()
            ),
        ));
    }
    let mut ranked: Vec<usize> = (0..model.items.len()).collect();
    ranked.sort_by(|&a, &b| {
        model.item_counts[b]
            .cmp(&model.item_counts[a])
            .then(model.items[a].cmp(&model.items[b]))
    });
    ranked.truncate(k);
    let arms = ranked
        .iter()
        .enumerate()
        .map(|(arm_id, &i)| {
            ArmContext::new(
                arm_id,
                model.item_features[i].clone(),
                model.item_historical[i],
            )
        })
        .collect();
    let params = ModelParams::with_shared_noise(
        model.user_features[u].clone(),
        model.conformity(),
        noise_variance,
        k,
    )?;
    Ok(BanditInstance {
        source: InstanceSource::Ratings,
        user_id: Some(user_id.to_string()),
        params,
        noise_variance,
        arms,
        item_ids: Some(ranked.iter().map(|&i| model.items[i].clone()).collect()),
    })
}

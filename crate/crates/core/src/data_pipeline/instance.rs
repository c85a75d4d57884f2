//! Bandit-instance files (`*.inst`, TOML).
//!
//! ```toml
//! schema_version = 1
//! source = "synthetic"        # or "ratings"
//! alpha = 0.42
//! noise_variance = 1.0
//! theta = [0.51, 0.33]
//!
//! [[arms]]
//! arm_id = 0
//! item_id = "1196"            # optional; present for ratings-derived instances
//! features = [0.7, 0.2]
//! historical_rating = 4.1
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{ArmContext, ModelParams};
use crate::error::{Error, Result};

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    Synthetic,
    Ratings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmRow {
    arm_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    item_id: Option<String>,
    features: Vec<f64>,
    historical_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    schema_version: u32,
    source: InstanceSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    user_id: Option<String>,
    alpha: f64,
    noise_variance: f64,
    theta: Vec<f64>,
    arms: Vec<ArmRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    pub source: InstanceSource,
    pub user_id: Option<String>,
    pub params: ModelParams,
    pub noise_variance: f64,
    pub arms: Vec<ArmContext>,
    /// Parallel to `arms` for ratings-derived instances.
    pub item_ids: Option<Vec<String>>,
}

impl BanditInstance {
    pub fn synthetic(params: ModelParams, arms: Vec<ArmContext>, noise_variance: f64) -> Self {
        Self {
            source: InstanceSource::Synthetic,
            user_id: None,
            params,
            noise_variance,
            arms,
            item_ids: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn to_toml(&self) -> String {
        let doc = InstanceDoc {
            schema_version: INSTANCE_SCHEMA_VERSION,
            source: self.source,
            user_id: self.user_id.clone(),
            alpha: self.params.alpha,
            noise_variance: self.noise_variance,
            theta: self.params.theta.clone(),
            arms: self
                .arms
                .iter()
                .enumerate()
                .map(|(i, a)| ArmRow {
                    arm_id: a.arm_id,
                    item_id: self.item_ids.as_ref().map(|ids| ids[i].clone()),
                    features: a.features.clone(),
                    historical_rating: a.historical_rating,
                })
                .collect(),
        };
        toml::to_string(&doc).expect("instance document serializes")
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let doc: InstanceDoc = toml::from_str(text).map_err(|e| e.to_string())?;
        if doc.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {INSTANCE_SCHEMA_VERSION})",
                doc.schema_version
            ));
        }
        let n_arms = doc.arms.len();
        let params =
            ModelParams::with_shared_noise(doc.theta, doc.alpha, doc.noise_variance, n_arms)
                .map_err(|e| e.to_string())?;
        let item_ids = if doc.arms.iter().all(|a| a.item_id.is_some()) && n_arms > 0 {
            Some(
                doc.arms
                    .iter()
                    .map(|a| a.item_id.clone().unwrap_or_default())
                    .collect(),
            )
        } else {
            None
        };
        let arms: Vec<ArmContext> = doc
            .arms
            .into_iter()
            .map(|a| ArmContext::new(a.arm_id, a.features, a.historical_rating))
            .collect();
        for (i, arm) in arms.iter().enumerate() {
            if arm.arm_id != i {
                return Err(format!(
                    "arms[{i}]: arm_id must be {i}, found {}",
                    arm.arm_id
                ));
            }
            arm.validate(params.dim())
                .map_err(|e| format!("arms[{i}]: {e}"))?;
        }
        Ok(Self {
            source: doc.source,
            user_id: doc.user_id,
            params,
            noise_variance: doc.noise_variance,
            arms,
            item_ids,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|detail| Error::Parse {
            path: path.to_path_buf(),
            detail,
        })
    }
}

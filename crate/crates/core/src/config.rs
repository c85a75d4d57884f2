//! Experiment configuration documents (TOML) and named presets.
//!
//! ```toml
//! schema_version = 1
//! horizon = 10000
//! n_arms = 10
//! dimension = 10
//! noise_variance = 1.0
//! alpha = "sample"          # or a number in [0, 1]
//! n_seeds = 10
//! seed = 0
//! history_policy = "static" # or "running-mean"
//! contexts = "fixed"        # or "resample"
//!
//! [source]
//! kind = "synthetic"        # or { kind = "instance", path = "..." }
//!
//! [[policies]]
//! kind = "ts-conf"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::HistoryPolicy;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::policies::{
    default_beta, GaussianTs, LinUcb, LinUcbConf, Policy, ScoreMode, TsConf, TsConfMcmc,
};
use crate::posterior_exact::DEFAULT_EPS_SINGULAR;
use crate::posterior_gibbs::{AlphaPrior, GibbsConfig, InverseGammaPrior};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSetting {
    Fixed(f64),
    Named(AlphaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaKeyword {
    /// Drawn once per seed with the instance.
    Sample,
}

impl Default for AlphaSetting {
    fn default() -> Self {
        AlphaSetting::Named(AlphaKeyword::Sample)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    /// Arm features are drawn once per seed.
    #[default]
    Fixed,
    /// Arm features are redrawn every round; historical ratings stay with the arm.
    Resample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    Synthetic,
    Instance { path: PathBuf },
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Synthetic
    }
}

fn default_lambda() -> f64 {
    1.0
}
fn default_one() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    DEFAULT_EPS_SINGULAR
}
fn default_iterations() -> usize {
    100
}
fn default_true() -> bool {
    true
}
fn default_alpha_mean() -> f64 {
    0.5
}
fn default_ig() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinUcbConfScore {
    #[default]
    Augmented,
    Recovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    TsConf {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_one")]
        prior_precision: f64,
        #[serde(default = "default_eps")]
        eps_singular: f64,
    },
    TsConfMcmc {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_iterations")]
        n_iterations: usize,
        #[serde(default = "default_true")]
        warm_start: bool,
        #[serde(default = "default_alpha_mean")]
        alpha_prior_mean: f64,
        #[serde(default = "default_one")]
        alpha_prior_variance: f64,
        #[serde(default = "default_true")]
        alpha_truncated: bool,
        #[serde(default = "default_ig")]
        sigma_prior_shape: f64,
        #[serde(default = "default_ig")]
        sigma_prior_scale: f64,
    },
    Linucb {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        beta: Option<f64>,
    },
    Ts {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_one")]
        v: f64,
    },
    LinucbConf {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        score: LinUcbConfScore,
    },
}

/// What a policy needs to know about the problem it is built for.
#[derive(Debug, Clone, Copy)]
pub struct ProblemShape {
    pub dimension: usize,
    pub n_arms: usize,
    pub horizon: usize,
    pub noise_variance: f64,
}

impl PolicySpec {
    pub fn ts_conf() -> Self {
        PolicySpec::TsConf {
            label: None,
            prior_precision: 1.0,
            eps_singular: DEFAULT_EPS_SINGULAR,
        }
    }

    pub fn ts_conf_mcmc(n_iterations: usize) -> Self {
        PolicySpec::TsConfMcmc {
            label: None,
            n_iterations,
            warm_start: true,
            alpha_prior_mean: 0.5,
            alpha_prior_variance: 1.0,
            alpha_truncated: true,
            sigma_prior_shape: 2.0,
            sigma_prior_scale: 2.0,
        }
    }

    pub fn linucb() -> Self {
        PolicySpec::Linucb {
            label: None,
            lambda: 1.0,
            beta: None,
        }
    }

    pub fn ts() -> Self {
        PolicySpec::Ts {
            label: None,
            lambda: 1.0,
            v: 1.0,
        }
    }

    pub fn linucb_conf() -> Self {
        PolicySpec::LinucbConf {
            label: None,
            lambda: 1.0,
            beta: None,
            score: LinUcbConfScore::Augmented,
        }
    }

    /// The five policies compared in the synthetic experiments.
    pub fn standard_set() -> Vec<Self> {
        vec![
            Self::ts_conf(),
            Self::ts_conf_mcmc(100),
            Self::linucb_conf(),
            Self::linucb(),
            Self::ts(),
        ]
    }

    pub fn label(&self) -> String {
        match self {
            PolicySpec::TsConf { label, .. } => label.clone().unwrap_or_else(|| "ts-conf".into()),
            PolicySpec::TsConfMcmc { n_iterations, .. } => format!("ts-conf-mcmc-n{n_iterations}"),
            PolicySpec::Linucb { label, .. } => label.clone().unwrap_or_else(|| "linucb".into()),
            PolicySpec::Ts { label, .. } => label.clone().unwrap_or_else(|| "ts".into()),
            PolicySpec::LinucbConf { label, .. } => {
                label.clone().unwrap_or_else(|| "linucb-conf".into())
            }
        }
    }

    pub fn build(&self, shape: &ProblemShape) -> Result<Box<dyn Policy>> {
        let d = shape.dimension;
        let name = self.label();
        Ok(match self {
            PolicySpec::TsConf {
                prior_precision,
                eps_singular,
                ..
            } => Box::new(
                TsConf::new(d, *prior_precision, shape.noise_variance)?
                    .with_eps_singular(*eps_singular)
                    .named(name),
            ),
            PolicySpec::TsConfMcmc {
                n_iterations,
                warm_start,
                alpha_prior_mean,
                alpha_prior_variance,
                alpha_truncated,
                sigma_prior_shape,
                sigma_prior_scale,
                ..
            } => {
                let config = GibbsConfig {
                    n_iterations: *n_iterations,
                    burn_in: 0,
                    n_arms: shape.n_arms,
                    theta_prior_mean: vec![0.0; d],
                    theta_prior_cov: Matrix::identity(d, d),
                    alpha_prior: AlphaPrior {
                        mean: *alpha_prior_mean,
                        variance: *alpha_prior_variance,
                        truncated: *alpha_truncated,
                    },
                    sigma_prior: InverseGammaPrior {
                        shape: *sigma_prior_shape,
                        scale: *sigma_prior_scale,
                    },
                    eps_singular: DEFAULT_EPS_SINGULAR,
                    fixed_alpha: None,
                    fixed_sigma: None,
                };
                let p = TsConfMcmc::new(config)?.named(name);
                Box::new(if *warm_start { p } else { p.cold_start() })
            }
            PolicySpec::Linucb { lambda, beta, .. } => Box::new(
                LinUcb::new(
                    d,
                    *lambda,
                    beta.unwrap_or_else(|| default_beta(shape.horizon)),
                )?
                .named(name),
            ),
            PolicySpec::Ts { lambda, v, .. } => {
                Box::new(GaussianTs::new(d, *lambda, *v)?.named(name))
            }
            PolicySpec::LinucbConf {
                lambda,
                beta,
                score,
                ..
            } => {
                let mode = match score {
                    LinUcbConfScore::Augmented => ScoreMode::Augmented,
                    LinUcbConfScore::Recovered => ScoreMode::Recovered,
                };
                Box::new(
                    LinUcbConf::new(
                        d,
                        *lambda,
                        beta.unwrap_or_else(|| default_beta(shape.horizon)),
                    )?
                    .with_mode(mode)
                    .named(name),
                )
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub horizon: usize,
    pub n_arms: usize,
    pub dimension: usize,
    /// Noise variance of the simulated feedback. For instance sources the
    /// file's value is used unless this is set.
    #[serde(default)]
    pub noise_variance: Option<f64>,
    #[serde(default)]
    pub alpha: AlphaSetting,
    pub n_seeds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub history_policy: HistoryPolicy,
    #[serde(default)]
    pub contexts: ContextMode,
    #[serde(default)]
    pub source: SourceSpec,
    pub policies: Vec<PolicySpec>,
}

impl ExperimentConfig {
    pub fn synthetic(
        horizon: usize,
        n_arms: usize,
        dimension: usize,
        noise_variance: f64,
        n_seeds: usize,
    ) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            name: None,
            horizon,
            n_arms,
            dimension,
            noise_variance: Some(noise_variance),
            alpha: AlphaSetting::default(),
            n_seeds,
            seed: 0,
            history_policy: HistoryPolicy::Static,
            contexts: ContextMode::Fixed,
            source: SourceSpec::Synthetic,
            policies: PolicySpec::standard_set(),
        }
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|detail| Error::Parse {
            path: path.to_path_buf(),
            detail,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!(
                    "expected {CONFIG_SCHEMA_VERSION}, found {}",
                    self.schema_version
                ),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.n_arms < 1 {
            return Err(Error::config("n_arms", "must be at least 1"));
        }
        if self.dimension < 1 {
            return Err(Error::config("dimension", "must be at least 1"));
        }
        if self.n_seeds < 1 {
            return Err(Error::config("n_seeds", "must be at least 1"));
        }
        if let Some(s2) = self.noise_variance {
            if !(s2 > 0.0) || !s2.is_finite() {
                return Err(Error::config("noise_variance", "must be positive"));
            }
        }
        if let AlphaSetting::Fixed(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::config("alpha", "must lie in [0, 1]"));
            }
        }
        if self.policies.is_empty() {
            return Err(Error::config("policies", "at least one policy is required"));
        }
        let mut labels: Vec<String> = self.policies.iter().map(PolicySpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(
                "policies",
                format!("duplicate policy label `{}`", w[0]),
            ));
        }
        for (i, p) in self.policies.iter().enumerate() {
            let field = format!("policies[{i}]");
            match p {
                PolicySpec::TsConf {
                    prior_precision,
                    eps_singular,
                    ..
                } => {
                    if !(*prior_precision > 0.0) {
                        return Err(Error::config(field, "prior_precision must be positive"));
                    }
                    if !(*eps_singular > 0.0 && *eps_singular < 1.0) {
                        return Err(Error::config(field, "eps_singular must lie in (0, 1)"));
                    }
                }
                PolicySpec::TsConfMcmc { n_iterations, .. } if *n_iterations == 0 => {
                    return Err(Error::config(field, "n_iterations must be at least 1"));
                }
                PolicySpec::Linucb { lambda, beta, .. }
                | PolicySpec::LinucbConf { lambda, beta, .. } => {
                    if !(*lambda > 0.0) {
                        return Err(Error::config(field, "lambda must be positive"));
                    }
                    if beta.is_some_and(|b| !(b >= 0.0)) {
                        return Err(Error::config(field, "beta must be non-negative"));
                    }
                }
                PolicySpec::Ts { lambda, v, .. } => {
                    if !(*lambda > 0.0 && *v > 0.0) {
                        return Err(Error::config(field, "lambda and v must be positive"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Seeds of the individual runs.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64)
            .map(|i| self.seed.wrapping_add(i))
            .collect()
    }
}

/// Named presets: `synthetic-default`, `synthetic-full`,
/// `synthetic-d{5,10,15,20}`, `synthetic-noise-{0.5,1.0,1.5,2.0}`,
/// `mcmc-sensitivity`, `degenerate-alpha-0`, `degenerate-alpha-0.95`.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let base = |horizon| ExperimentConfig::synthetic(horizon, 10, 10, 1.0, 10);
    let mut cfg = match name {
        "synthetic-default" => base(10_000),
        "synthetic-full" => base(50_000),
        "mcmc-sensitivity" => {
            let mut c = base(10_000);
            c.n_seeds = 5;
            c.policies = vec![
                PolicySpec::ts_conf(),
                PolicySpec::ts_conf_mcmc(10),
                PolicySpec::ts_conf_mcmc(50),
                PolicySpec::ts_conf_mcmc(100),
            ];
            c
        }
        "degenerate-alpha-0" | "degenerate-alpha-0.95" => {
            let mut c = base(10_000);
            c.alpha = AlphaSetting::Fixed(if name.ends_with("0.95") { 0.95 } else { 0.0 });
            c
        }
        _ => {
            let mut c = base(10_000);
            if let Some(d) = name.strip_prefix("synthetic-d") {
                let d: usize = d.parse().ok()?;
                if !crate::data_pipeline::SUPPORTED_DIMENSIONS.contains(&d) {
                    return None;
                }
                c.dimension = d;
            } else if let Some(s2) = name.strip_prefix("synthetic-noise-") {
                let s2 = match s2 {
                    "0.5" => 0.5,
                    "1.0" => 1.0,
                    "1.5" => 1.5,
                    "2.0" => 2.0,
                    _ => return None,
                };
                c.noise_variance = Some(s2);
            } else {
                return None;
            }
            c
        }
    };
    cfg.name = Some(name.to_string());
    Some(cfg)
}

pub const PRESET_NAMES: &[&str] = &[
    "synthetic-default",
    "synthetic-full",
    "synthetic-d5",
    "synthetic-d10",
    "synthetic-d15",
    "synthetic-d20",
    "synthetic-noise-0.5",
    "synthetic-noise-1.0",
    "synthetic-noise-1.5",
    "synthetic-noise-2.0",
    "mcmc-sensitivity",
    "degenerate-alpha-0",
    "degenerate-alpha-0.95",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap_or_else(|| panic!("{name}"));
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
        assert!(preset("synthetic-d7").is_none());
        assert!(preset("nope").is_none());
    }

    #[test]
    fn default_preset_matches_reference_grid() {
        let c = preset("synthetic-default").unwrap();
        assert_eq!(
            (c.dimension, c.n_arms, c.noise_variance),
            (10, 10, Some(1.0))
        );
        assert_eq!(preset("synthetic-full").unwrap().horizon, 50_000);
    }

    #[test]
    fn minimal_document_parses() {
        let text = r#"
            schema_version = 1
            horizon = 5
            n_arms = 3
            dimension = 2
            n_seeds = 2
            alpha = 0.25

            [[policies]]
            kind = "ts-conf"

            [[policies]]
            kind = "linucb"
            beta = 0.5
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.alpha, AlphaSetting::Fixed(0.25));
        assert_eq!(c.source, SourceSpec::Synthetic);
        assert_eq!(
            c.policies[1],
            PolicySpec::Linucb {
                label: None,
                lambda: 1.0,
                beta: Some(0.5)
            }
        );
    }

    #[test]
    fn errors_name_the_field() {
        let err =
            ExperimentConfig::from_toml("schema_version = 1\nhorizon = \"long\"\n").unwrap_err();
        assert!(err.contains("horizon") && err.contains("line 2"), "{err}");
        let err = ExperimentConfig::from_toml(
            "schema_version = 1\nhorizon = 0\nn_arms = 1\ndimension = 1\nn_seeds = 1\n[[policies]]\nkind = \"ts\"\n",
        )
        .unwrap_err();
        assert!(err.contains("horizon"), "{err}");
        let err = ExperimentConfig::from_toml(
            "schema_version = 1\nhorizon = 2\nn_arms = 1\ndimension = 1\nn_seeds = 1\nbogus = 3\n[[policies]]\nkind = \"ts\"\n",
        )
        .unwrap_err();
        assert!(err.contains("bogus"), "{err}");
    }
}

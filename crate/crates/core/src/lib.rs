//! Contextual linear bandits under herding-biased feedback.
//!
//! Users report `V = α·h + (1−α)·θᵀx + η`, a blend of their own preference and
//! the item's historical rating `h`. The crate provides the simulator, exact and
//! Gibbs posteriors for the augmented parameter `[α; (1−α)θ]`, the bandit
//! policies, an experiment harness and a ratings-to-instance pipeline.

pub mod config;
pub mod data_pipeline;
pub mod distributions;
pub mod env;
pub mod error;
pub mod harness;
pub mod history;
pub mod linalg;
pub mod policies;
pub mod posterior_exact;
pub mod posterior_gibbs;
pub mod rng;

pub use config::{ExperimentConfig, PolicySpec};
pub use env::{ArmContext, Environment, Feedback, HistoryPolicy, ModelParams};
pub use error::{Error, Result};
pub use harness::{Experiment, RegretTrace, Summary};
pub use policies::Policy;
pub use posterior_exact::PosteriorState;

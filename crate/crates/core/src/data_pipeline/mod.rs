//! Problem instances: synthetic generation and real-ratings ingestion.

mod instance;
mod mf;
mod ratings;
mod synthetic;

pub use instance::{BanditInstance, InstanceSource, INSTANCE_SCHEMA_VERSION};
pub use mf::{
    fit_mf, fit_mf_with_historical, sigmoid, to_bandit_instance, MfGradient, MfHyper, MfModel,
    SUPPORTED_DIMENSIONS,
};
pub use ratings::{
    filter_dataset, historical_scores, ColumnMap, FilterReport, Rating, RatingsDataset, MIN_RATINGS,
};
pub use synthetic::{draw_features, generate_synthetic, FEATURE_MEAN, FEATURE_VARIANCE};

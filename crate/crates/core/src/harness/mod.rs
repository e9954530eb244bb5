//! Training, evaluation, and experiment orchestration.

mod compare;
mod config;
mod metrics;
mod train;

pub use compare::{compare_configs, compare_variants, run_seed, ComparisonTable, VariantSummary};
pub use config::ExperimentConfig;
pub use metrics::{argmax, EpochRecord, EvalReport};
pub use train::{
    evaluate, evaluate_prepared, predict, predict_prepared, prepare, prepare_preprocessed, train, train_prepared,
    Prediction, PreparedSet,
};

pub use crate::model::Variant;

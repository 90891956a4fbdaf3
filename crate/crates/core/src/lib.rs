//! Boosted decision trees for the UCI Adult census income task.
//!
//! The crate is organised as a pipeline: [`ingest`] parses the raw files,
//! [`preprocess`] encodes and splits them, [`trees`] and [`boost`] fit models,
//! [`tune`] searches hyper-parameters and [`metrics`] scores predictions.
//! [`pipeline`] chains the steps the way the command-line tool runs them.

pub mod boost;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod render;
pub mod rng;
pub mod stats;
pub mod trees;
pub mod tune;

pub use boost::{BoostMode, BoostParams, BoostStage, BoostedEnsemble};
pub use error::{Error, Result};
pub use ingest::{AttributeId, FieldValue, Income, Record, RecordSet};
pub use metrics::{ConfusionMatrix, EvalReport, RocCurve};
pub use model::ModelFile;
pub use preprocess::{Dataset, FeatureMatrix, LabelVector, SplitIndex};
pub use trees::{DecisionTree, ImportanceVector};
pub use tune::{ParamGrid, TuneReport};

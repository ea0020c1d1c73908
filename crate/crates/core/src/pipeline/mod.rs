//! Models, synthetic data, training and the unit comparison harness.

mod compare;
mod data;
mod model;
mod train;

pub use compare::{compare_units, ComparisonRow};
pub use data::{sample_pair, synthetic_dataset, Sample, SyntheticShape};
pub use model::{Backbone, BackboneKind, BackboneSpec, Model, ModelSpec};
pub use train::{evaluate, train, train_model, TrainConfig, TrainOutcome};

//! Target construction, the training loop, inference and checkpoints.

mod checkpoint;
mod config;
mod data;
mod model;
mod targets;
mod trainer;

pub use checkpoint::{AdamState, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::TrainingConfig;
pub use data::{dataset_for, load_graph, prepare_samples, split_samples, Dataset, Sample};
pub use model::{Encoded, Encoder, GraphInput, Model, Pass};
pub use targets::build_targets;
pub use trainer::{mean_tau, train, train_with, EpochLog, TrainFailure, TrainOutcome};

//! Surrogate-gradient BPTT training and checkpoints.

pub mod checkpoint;
pub mod config;
mod graph;
pub mod loss;
mod train;

pub use checkpoint::{Checkpoint, CheckpointMeta, Manifest};
pub use config::{NeuronType, TrainConfig};
pub use graph::{BpttOptions, SpikeFn};
pub use loss::{cosine_lr, predict, rate_loss, rate_loss_grad};
pub use train::{
    batch_loss, bptt_gradients, evaluate, train, BatchGradients, Divergence, EpochStats,
    Evaluation, Network, Sample, TrainRun,
};

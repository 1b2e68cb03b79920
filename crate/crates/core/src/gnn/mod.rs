//! Half-convolution graph network with exact reverse-mode gradients and a
//! minibatch trainer.

mod format;
mod layers;
mod model;
mod train;

pub use format::{LayerRecord, ModelFile, MODEL_VERSION};
pub use layers::{Dense, Mlp};
pub use model::{GnnModel, DEFAULT_WIDTH};
pub use train::{train, train_with_validation, EpochLoss, LabeledGraph, Optimizer, TrainConfig, TrainReport};

/// Deterministically initialised model of width `q`.
pub fn init_model(q: usize, seed: u64) -> GnnModel {
    GnnModel::new(q, seed)
}

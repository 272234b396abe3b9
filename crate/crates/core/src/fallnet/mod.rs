//! The six-block fall classifier, its training loop and checkpoint format.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{
    from_bytes, load_checkpoint, save_checkpoint, to_bytes, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{
    FallNetModel, ForwardTrace, Gradients, InitScheme, InputSize, Layer, LayerSpec, FILTER_SCHEDULE, HEAD_UNITS,
};
pub use train::{
    measure, predict_label, sample_loss_and_grad, train, train_with_progress, EpochStats, TrainConfig, TrainError,
};

use crate::tensor::Tensor;

/// Anything that maps a normalized `H×W×3` frame to P(fall).
pub trait FallScorer: Sync {
    fn fall_probability(&self, image: &Tensor<f32>) -> Result<f32, ModelError>;
}

impl FallScorer for FallNetModel<f32> {
    fn fall_probability(&self, image: &Tensor<f32>) -> Result<f32, ModelError> {
        self.forward(image)
    }
}

impl<F> FallScorer for F
where
    F: Fn(&Tensor<f32>) -> f32 + Sync,
{
    fn fall_probability(&self, image: &Tensor<f32>) -> Result<f32, ModelError> {
        Ok(self(image))
    }
}

use thiserror::Error;

use crate::nn::NnError;
use crate::tensor::ShapeError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

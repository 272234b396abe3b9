//! Layer math, loss, optimizer and initialization for the fall classifier.
//!
//! Images and feature maps are `H×W×C` tensors. Convolution kernels are
//! `3×3×C×F` and dense weights are `N×M`, both row-major.

mod activation;
mod adam;
mod conv;
mod dense;
mod gradcheck;
mod init;
mod loss;
mod pool;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, KERNEL_SIZE};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use gradcheck::{finite_diff_at, finite_diff_grad, relative_error, DEFAULT_STEP};
pub use init::{gaussian_init, DEFAULT_INIT_SD};
pub use loss::{bce_loss, bce_mean, PROB_CLAMP};
pub use pool::{maxpool2d, maxpool2d_backward, Pooled};

use thiserror::Error;

use crate::tensor::ShapeError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("invalid input: {0}")]
    Input(String),
}

/// `(height, width, channels)` of an `H×W×C` tensor.
pub(crate) fn hwc(shape: &[usize], what: &'static str) -> Result<(usize, usize, usize), ShapeError> {
    match *shape {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(ShapeError::mismatch(what, &[0, 0, 0], shape)),
    }
}

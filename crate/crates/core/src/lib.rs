//! Fall classification core.
//!
//! * [`tensor`] and [`nn`]: a small CPU neural-network kernel (direct 3×3
//!   convolution, ReLU, 2×2 max pooling, dense, sigmoid, binary
//!   cross-entropy, Adam, Gaussian init and a central-difference gradient
//!   oracle).
//! * [`fallnet`]: the six-block fall classifier, its training loop and the
//!   binary checkpoint format.
//! * [`gradcheck`]: the analytic-versus-numeric gradient report.
//! * [`dataset`]: NetPBM ingestion, resizing, manifests, stratified splits,
//!   confusion-matrix metrics and curve export.

pub mod dataset;
pub mod fallnet;
pub mod gradcheck;
pub mod nn;
pub mod tensor;

pub use tensor::{Scalar, ShapeError, Tensor};

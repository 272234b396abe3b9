//! Labeled frame datasets: NetPBM ingestion, resizing, manifests, splits,
//! scoring and curve export.

mod curves;
mod manifest;
mod metrics;
mod netpbm;
mod resize;
mod split;
pub mod synth;

pub use curves::{export_curves, format_curves, CURVE_HEADER};
pub use manifest::{load_manifest, load_samples, DatasetManifest, ManifestEntry};
pub use metrics::{evaluate, metrics_from_counts, Metrics};
pub use netpbm::{encode_ppm, load_image, load_netpbm};
pub use resize::resize_bilinear;
pub use split::{stratified_split, Labeled, DEFAULT_SPLIT_SEED, DEFAULT_VAL_FRACTION};

use std::fmt;
use std::io;
use std::str::FromStr;

use thiserror::Error;

use crate::fallnet::ModelError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NotFall = 0,
    Fall = 1,
}

impl Label {
    /// Training target: 1.0 for a fall.
    pub fn target(self) -> f32 {
        match self {
            Label::Fall => 1.0,
            Label::NotFall => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fall => "fall",
            Label::NotFall => "not_fall",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "fall" | "1" => Ok(Label::Fall),
            "not_fall" | "0" => Ok(Label::NotFall),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// A normalized `H×W×3` frame with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub source_path: String,
    pub image: Tensor<f32>,
    pub label: Label,
}

impl LabeledSample {
    pub fn new(source_path: impl Into<String>, image: Tensor<f32>, label: Label) -> Self {
        LabeledSample {
            source_path: source_path.into(),
            image,
            label,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("NetPBM format error: {0}")]
    Format(String),
    #[error("ingestion failed for {} item(s): {}", offenders.len(), offenders.join("; "))]
    Ingest { offenders: Vec<String> },
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

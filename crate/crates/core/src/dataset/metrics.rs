use rayon::prelude::*;

use super::{DatasetError, Label, LabeledSample};
use crate::fallnet::{predict_label, FallScorer};
use crate::nn::bce_loss;

/// Confusion-matrix counts and the ratios derived from them.
///
/// A ratio whose denominator is zero is reported as 0 with its `*_defined`
/// flag cleared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    /// Mean BCE, present when computed from scored samples.
    pub mean_loss: Option<f64>,
}

impl Metrics {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

pub fn metrics_from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Result<Metrics, DatasetError> {
    let total = tp + fp + fn_ + tn;
    if total == 0 {
        return Err(DatasetError::Input("confusion matrix is empty".into()));
    }
    let (precision, precision_defined) = ratio(tp, tp + fp);
    let (recall, recall_defined) = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        tp,
        fp,
        fn_,
        tn,
        precision,
        recall,
        accuracy: (tp + tn) as f64 / total as f64,
        f1,
        precision_defined,
        recall_defined,
        mean_loss: None,
    })
}

/// Scores every sample, thresholds it and tallies the confusion matrix.
pub fn evaluate(scorer: &impl FallScorer, samples: &[LabeledSample], threshold: f64) -> Result<Metrics, DatasetError> {
    if samples.is_empty() {
        return Err(DatasetError::Input("no samples to evaluate".into()));
    }
    predict_label(0.5, threshold)?;
    let scored = samples
        .par_iter()
        .map(|s| {
            let p = scorer.fall_probability(&s.image)?;
            let (loss, _) = bce_loss(p, s.label.target()).map_err(crate::fallnet::ModelError::from)?;
            Ok((predict_label(f64::from(p), threshold)?, s.label, f64::from(loss)))
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;

    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    let mut loss = 0.0;
    for (pred, truth, l) in scored {
        loss += l;
        match (pred, truth) {
            (Label::Fall, Label::Fall) => tp += 1,
            (Label::Fall, Label::NotFall) => fp += 1,
            (Label::NotFall, Label::Fall) => fn_ += 1,
            (Label::NotFall, Label::NotFall) => tn += 1,
        }
    }
    let mut m = metrics_from_counts(tp, fp, fn_, tn)?;
    m.mean_loss = Some(loss / samples.len() as f64);
    Ok(m)
}

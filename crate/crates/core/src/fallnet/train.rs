use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::{FallNetModel, Gradients, ModelError};
use crate::dataset::{Label, LabeledSample};
use crate::nn::{adam_step, bce_loss, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            learning_rate: 1e-4,
            batch_size: 2,
            seed: 42,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs < 1 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the training curve. Epoch 0 is measured before any update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged: non-finite loss or gradient in epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `fall` iff `probability ≥ threshold`.
pub fn predict_label(probability: f64, threshold: f64) -> Result<Label, ModelError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ModelError::Config(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(if probability >= threshold {
        Label::Fall
    } else {
        Label::NotFall
    })
}

/// BCE loss, predicted probability and parameter gradients for one sample.
pub fn sample_loss_and_grad(
    model: &FallNetModel<f32>,
    sample: &LabeledSample,
) -> Result<(f64, f32, Gradients<f32>), ModelError> {
    let trace = model.forward_trace(&sample.image)?;
    let p = trace.probability();
    let (loss, dp) = bce_loss(p, sample.label.target())?;
    let grads = model.backward(&trace, dp)?;
    Ok((f64::from(loss), p, grads))
}

/// Mean BCE and accuracy (threshold 0.5) of `model` over `samples`.
pub fn measure(model: &FallNetModel<f32>, samples: &[LabeledSample]) -> Result<(f64, f64), ModelError> {
    let scored: Vec<(f64, bool)> = samples
        .par_iter()
        .map(|s| {
            let p = model.forward(&s.image)?;
            if p.is_nan() {
                return Ok((f64::NAN, false));
            }
            let (loss, _) = bce_loss(p, s.label.target())?;
            let correct = predict_label(f64::from(p), 0.5)? == s.label;
            Ok((f64::from(loss), correct))
        })
        .collect::<Result<_, ModelError>>()?;
    let n = scored.len().max(1) as f64;
    let loss = scored.iter().map(|s| s.0).sum::<f64>() / n;
    let acc = scored.iter().filter(|s| s.1).count() as f64 / n;
    Ok((loss, acc))
}

fn epoch_stats(
    epoch: usize,
    model: &FallNetModel<f32>,
    train_set: &[LabeledSample],
    val_set: &[LabeledSample],
) -> Result<EpochStats, TrainError> {
    let (train_loss, train_accuracy) = measure(model, train_set)?;
    let (val_loss, val_accuracy) = measure(model, val_set)?;
    if !train_loss.is_finite() {
        return Err(TrainError::Diverged { epoch, batch: 0 });
    }
    Ok(EpochStats {
        epoch,
        train_loss,
        train_accuracy,
        val_loss,
        val_accuracy,
    })
}

/// Mini-batch Adam on mean BCE. Returns `epochs + 1` rows, the first taken
/// before any update; later rows are measured on the post-epoch weights.
pub fn train(
    model: &mut FallNetModel<f32>,
    train_set: &[LabeledSample],
    val_set: &[LabeledSample],
    config: &TrainConfig,
) -> Result<Vec<EpochStats>, TrainError> {
    train_with_progress(model, train_set, val_set, config, |_| {})
}

pub fn train_with_progress(
    model: &mut FallNetModel<f32>,
    train_set: &[LabeledSample],
    val_set: &[LabeledSample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset("training"));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptyDataset("validation"));
    }

    let adam = AdamConfig::with_lr(config.learning_rate);
    let mut states = model
        .params()
        .iter()
        .map(|p| AdamState::new(p.shape(), adam))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ModelError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let first = epoch_stats(0, model, train_set, val_set)?;
    on_epoch(&first);
    let mut stats = vec![first];

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let per_sample = idx
                .par_iter()
                .map(|&i| {
                    let sample = &train_set[i];
                    let trace = model.forward_trace(&sample.image)?;
                    if trace.probability().is_nan() {
                        return Err(TrainError::Diverged { epoch, batch });
                    }
                    let (loss, dp) = bce_loss(trace.probability(), sample.label.target()).map_err(ModelError::from)?;
                    Ok((f64::from(loss), model.backward(&trace, dp)?))
                })
                .collect::<Result<Vec<_>, TrainError>>()?;

            // Reduce in batch order so results do not depend on scheduling.
            let mut iter = per_sample.into_iter();
            let (mut loss_sum, mut total) = iter.next().expect("chunks are non-empty");
            for (loss, g) in iter {
                loss_sum += loss;
                total.add_assign(&g).map_err(ModelError::from)?;
            }
            if !loss_sum.is_finite() || !total.is_finite() {
                return Err(TrainError::Diverged { epoch, batch });
            }
            total.scale(1.0 / idx.len() as f32);

            for ((param, grad), state) in model.params_mut().into_iter().zip(&total.0).zip(&mut states) {
                adam_step(param, grad, state).map_err(ModelError::from)?;
            }
        }
        let row = epoch_stats(epoch, model, train_set, val_set)?;
        log::debug!("epoch {epoch}: {row:?}");
        on_epoch(&row);
        stats.push(row);
    }
    Ok(stats)
}

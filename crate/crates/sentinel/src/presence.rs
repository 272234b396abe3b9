//! Frame scoring: motion-based presence and the fall probability source.

use fallwatch::dataset::resize_bilinear;
use fallwatch::fallnet::FallNetModel;
use fallwatch::{ShapeError, Tensor};

use crate::SentinelError;

/// Mean absolute per-pixel difference of two same-shaped frames.
pub fn presence_score(prev: &Tensor<f32>, frame: &Tensor<f32>) -> Result<f64, ShapeError> {
    if prev.shape() != frame.shape() {
        return Err(ShapeError::mismatch("presence frame", prev.shape(), frame.shape()));
    }
    if frame.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = prev
        .data()
        .iter()
        .zip(frame.data())
        .map(|(a, b)| f64::from((a - b).abs()))
        .sum();
    Ok(total / frame.len() as f64)
}

/// Tracks the previous frame. The first frame, and any frame whose shape
/// differs from its predecessor, scores 0.
#[derive(Debug, Default, Clone)]
pub struct PresenceGate {
    prev: Option<Tensor<f32>>,
}

impl PresenceGate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, frame: &Tensor<f32>) -> f64 {
        let score = match &self.prev {
            Some(prev) => presence_score(prev, frame).unwrap_or(0.0),
            None => 0.0,
        };
        self.prev = Some(frame.clone());
        score
    }
}

/// Fall probability of one frame.
pub trait FrameScorer: Send {
    fn score(&mut self, frame: &Tensor<f32>) -> Result<f64, SentinelError>;
}

/// Mean brightness as the fall probability. A stand-in model for scripted
/// scenarios.
#[derive(Debug, Default, Clone, Copy)]
pub struct BrightnessStub;

impl FrameScorer for BrightnessStub {
    fn score(&mut self, frame: &Tensor<f32>) -> Result<f64, SentinelError> {
        Ok(f64::from(frame.mean()).clamp(0.0, 1.0))
    }
}

/// Runs a FallNet, resizing frames to its input size first.
pub struct ModelScorer {
    model: FallNetModel<f32>,
}

impl ModelScorer {
    pub fn new(model: FallNetModel<f32>) -> Self {
        ModelScorer { model }
    }
}

impl FrameScorer for ModelScorer {
    fn score(&mut self, frame: &Tensor<f32>) -> Result<f64, SentinelError> {
        let input = self.model.input_size();
        let resized;
        let image = if frame.shape() == input.shape() {
            frame
        } else {
            if frame.shape().len() != 3 || frame.shape()[2] != input.channels {
                return Err(SentinelError::Model(format!(
                    "frame shape {:?} does not match model input {:?}",
                    frame.shape(),
                    input.shape()
                )));
            }
            resized =
                resize_bilinear(frame, input.height, input.width).map_err(|e| SentinelError::Model(e.to_string()))?;
            &resized
        };
        let p = self
            .model
            .forward(image)
            .map_err(|e| SentinelError::Model(e.to_string()))?;
        if !p.is_finite() {
            return Err(SentinelError::Model("model produced a non-finite probability".into()));
        }
        Ok(f64::from(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fallwatch::fallnet::InputSize;

    #[test]
    fn identical_frames_score_zero() {
        let a = Tensor::from_fn(&[4, 4, 3], |i| (i % 7) as f32 / 7.0).unwrap();
        assert_eq!(presence_score(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn zeros_against_ones_score_one() {
        let z = Tensor::zeros(&[3, 5, 3]).unwrap();
        let o = Tensor::full(&[3, 5, 3], 1.0).unwrap();
        assert_eq!(presence_score(&z, &o).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Tensor::<f32>::zeros(&[2, 2, 3]).unwrap();
        let b = Tensor::<f32>::zeros(&[2, 3, 3]).unwrap();
        assert!(presence_score(&a, &b).is_err());
    }

    #[test]
    fn gate_scores_first_frame_zero() {
        let mut g = PresenceGate::new();
        assert_eq!(g.observe(&Tensor::full(&[2, 2, 3], 0.2).unwrap()), 0.0);
        let s = g.observe(&Tensor::full(&[2, 2, 3], 0.9).unwrap());
        assert!((s - 0.7).abs() < 1e-6);
    }

    #[test]
    fn model_scorer_resizes() {
        let model = FallNetModel::build(InputSize::new(8, 8, 3), 1).unwrap();
        let mut s = ModelScorer::new(model.clone());
        let frame = Tensor::full(&[16, 12, 3], 0.5).unwrap();
        let direct = model.forward(&Tensor::full(&[8, 8, 3], 0.5).unwrap()).unwrap();
        assert_eq!(s.score(&frame).unwrap(), f64::from(direct));
        assert!(s.score(&Tensor::full(&[8, 8, 1], 0.5).unwrap()).is_err());
    }
}

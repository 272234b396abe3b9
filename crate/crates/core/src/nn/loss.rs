use super::NnError;
use crate::tensor::Scalar;

/// Predicted probabilities are clamped into `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

/// Binary cross-entropy of one prediction, returning `(loss, dloss/dp)`.
///
/// The derivative is evaluated at the clamped probability, so a saturated
/// prediction still pushes back towards the label.
pub fn bce_loss<T: Scalar>(p: T, y: T) -> Result<(T, T), NnError> {
    if y != T::zero() && y != T::one() {
        return Err(NnError::Input(format!("label must be 0 or 1, got {y}")));
    }
    if p.is_nan() {
        return Err(NnError::Input("probability is NaN".into()));
    }
    let eps = T::of(PROB_CLAMP);
    let p = p.max(eps).min(T::one() - eps);
    let one = T::one();
    let loss = -(y * p.ln() + (one - y) * (one - p).ln());
    let grad = -y / p + (one - y) / (one - p);
    Ok((loss, grad))
}

/// Mean BCE over a batch of `(probability, label)` pairs.
pub fn bce_mean<T: Scalar>(pairs: impl IntoIterator<Item = (T, T)>) -> Result<T, NnError> {
    let mut total = 0.0f64;
    let mut n = 0usize;
    for (p, y) in pairs {
        total += bce_loss(p, y)?.0.as_f64();
        n += 1;
    }
    if n == 0 {
        return Err(NnError::Input("empty batch".into()));
    }
    Ok(T::of(total / n as f64))
}

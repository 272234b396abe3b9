use crate::tensor::Tensor;

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient `(f(θ+h) − f(θ−h)) / 2h`, one coordinate at a
/// time. Intended for 64-bit checks against analytic backprop.
pub fn finite_diff_grad<F>(loss: F, params: &Tensor<f64>, h: f64) -> Tensor<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let all: Vec<usize> = (0..params.len()).collect();
    let grad = finite_diff_at(loss, params, &all, h);
    Tensor::from_vec(params.shape(), grad).expect("shape copied from params")
}

/// Central differences at the listed flat indices only.
pub fn finite_diff_at<F>(mut loss: F, params: &Tensor<f64>, indices: &[usize], h: f64) -> Vec<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let mut probe = params.clone();
    indices
        .iter()
        .map(|&i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + h;
            let up = loss(&probe);
            probe.data_mut()[i] = orig - h;
            let down = loss(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − n| / (|a| + |n| + 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-12)
}

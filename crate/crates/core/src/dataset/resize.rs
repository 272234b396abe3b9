use crate::tensor::{ShapeError, Tensor};

/// Bilinear resampling of an `H×W×C` image with half-pixel centres: output
/// pixel `i` samples source coordinate `(i + 0.5)·in/out − 0.5`, clamped to
/// the image.
pub fn resize_bilinear(image: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>, ShapeError> {
    let (h, w, c) = crate::nn::hwc(image.shape(), "resize input")?;
    if out_h == 0 || out_w == 0 {
        return Err(ShapeError::NonPositive {
            shape: vec![out_h, out_w, c],
            axis: if out_h == 0 { 0 } else { 1 },
        });
    }
    if (out_h, out_w) == (h, w) {
        return Ok(image.clone());
    }
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f32)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, (s - lo as f64) as f32)
            })
            .collect()
    };
    let ys = taps(h, out_h);
    let xs = taps(w, out_w);
    let src = image.data();
    let px = |y: usize, x: usize, ch: usize| src[(y * w + x) * c + ch];
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let top = px(y0, x0, ch) + (px(y0, x1, ch) - px(y0, x0, ch)) * fx;
                let bottom = px(y1, x0, ch) + (px(y1, x1, ch) - px(y1, x0, ch)) * fx;
                out.push(top + (bottom - top) * fy);
            }
        }
    }
    Tensor::from_vec(&[out_h, out_w, c], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let img = Tensor::full(&[7, 5, 3], 0.3f32).unwrap();
        let out = resize_bilinear(&img, 64, 64).unwrap();
        assert_eq!(out.shape(), &[64, 64, 3]);
        assert!(out.data().iter().all(|&v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn two_by_two_down_to_one() {
        let img = Tensor::from_vec(&[2, 2, 1], vec![0.0f32, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(resize_bilinear(&img, 1, 1).unwrap().data(), &[0.5]);
    }

    #[test]
    fn one_by_one_up_to_two() {
        let img = Tensor::from_vec(&[1, 1, 3], vec![0.2f32, 0.4, 0.6]).unwrap();
        let out = resize_bilinear(&img, 2, 2).unwrap();
        assert_eq!(out.data(), &[0.2, 0.4, 0.6].repeat(4)[..]);
    }

    #[test]
    fn zero_target_is_rejected() {
        let img = Tensor::full(&[2, 2, 3], 0.1f32).unwrap();
        assert!(resize_bilinear(&img, 0, 4).is_err());
    }
}

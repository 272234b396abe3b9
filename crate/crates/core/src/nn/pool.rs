use super::hwc;
use crate::tensor::{Scalar, ShapeError, Tensor};

/// Output of a 2×2 / stride 2 max pool together with the flat input index
/// each output value was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub output: Tensor<T>,
    pub argmax: Vec<usize>,
}

/// 2×2 max pooling with stride 2. Output is `⌈H/2⌉×⌈W/2⌉×C`; a trailing
/// odd row/column is treated as padded with −∞. Ties keep the first
/// position in row-major window order.
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>) -> Result<Pooled<T>, ShapeError> {
    let (h, w, c) = hwc(input.shape(), "maxpool2d input")?;
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let src = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);

    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = (T::neg_infinity(), usize::MAX);
                for iy in (2 * oy)..(2 * oy + 2).min(h) {
                    for ix in (2 * ox)..(2 * ox + 2).min(w) {
                        let idx = (iy * w + ix) * c + ch;
                        if best.1 == usize::MAX || src[idx] > best.0 {
                            best = (src[idx], idx);
                        }
                    }
                }
                out.push(best.0);
                argmax.push(best.1);
            }
        }
    }
    Ok(Pooled {
        output: Tensor::from_vec(&[oh, ow, c], out)?,
        argmax,
    })
}

/// Routes each upstream value to the input position recorded in `argmax`.
pub fn maxpool2d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &Tensor<T>,
) -> Result<Tensor<T>, ShapeError> {
    if upstream.len() != argmax.len() {
        return Err(ShapeError::Length {
            shape: upstream.shape().to_vec(),
            len: argmax.len(),
        });
    }
    let mut grad = Tensor::zeros(input_shape)?;
    let g = grad.data_mut();
    for (&idx, &u) in argmax.iter().zip(upstream.data()) {
        g[idx] = g[idx] + u;
    }
    Ok(grad)
}

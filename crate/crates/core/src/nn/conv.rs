use super::hwc;
use crate::tensor::{Scalar, ShapeError, Tensor};

/// Spatial kernel extent. Convolutions are stride 1 with zero "same" padding.
pub const KERNEL_SIZE: usize = 3;
const PAD: isize = (KERNEL_SIZE / 2) as isize;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check_shapes<T: Scalar>(input: &Tensor<T>, kernels: &Tensor<T>) -> Result<(usize, usize, usize, usize), ShapeError> {
    let (h, w, c) = hwc(input.shape(), "conv2d input")?;
    match *kernels.shape() {
        [KERNEL_SIZE, KERNEL_SIZE, kc, f] if kc == c => Ok((h, w, c, f)),
        _ => Err(ShapeError::mismatch(
            "conv2d kernels",
            &[
                KERNEL_SIZE,
                KERNEL_SIZE,
                c,
                kernels.shape().last().copied().unwrap_or(0),
            ],
            kernels.shape(),
        )),
    }
}

/// Iterates the in-bounds taps of the 3×3 window centred on `(y, x)`:
/// yields `(tap index ky*3+kx, input row, input col)`.
fn taps(y: usize, x: usize, h: usize, w: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..KERNEL_SIZE).flat_map(move |ky| {
        (0..KERNEL_SIZE).filter_map(move |kx| {
            let iy = y as isize + ky as isize - PAD;
            let ix = x as isize + kx as isize - PAD;
            (iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w)
                .then(|| (ky * KERNEL_SIZE + kx, iy as usize, ix as usize))
        })
    })
}

/// `out[y,x,f] = bias[f] + Σ input[y+ky-1, x+kx-1, c] · kernels[ky,kx,c,f]`
/// with zeros outside the image.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, ShapeError> {
    let (h, w, c, f) = check_shapes(input, kernels)?;
    if bias.shape() != [f] {
        return Err(ShapeError::mismatch("conv2d bias", &[f], bias.shape()));
    }
    let src = input.data();
    let k = kernels.data();
    let b = bias.data();
    let mut out = vec![T::zero(); h * w * f];

    for y in 0..h {
        for x in 0..w {
            let o = &mut out[(y * w + x) * f..][..f];
            o.copy_from_slice(b);
            for (tap, iy, ix) in taps(y, x, h, w) {
                let px = &src[(iy * w + ix) * c..][..c];
                let kt = &k[tap * c * f..][..c * f];
                for (ci, &v) in px.iter().enumerate() {
                    if v == T::zero() {
                        continue;
                    }
                    for (acc, &kw) in o.iter_mut().zip(&kt[ci * f..][..f]) {
                        *acc = *acc + v * kw;
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[h, w, f], out)
}

/// Gradients of `Σ upstream ⊙ conv2d_forward(input, kernels, bias)`.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>, ShapeError> {
    let (h, w, c, f) = check_shapes(input, kernels)?;
    if upstream.shape() != [h, w, f] {
        return Err(ShapeError::mismatch("conv2d upstream", &[h, w, f], upstream.shape()));
    }
    let src = input.data();
    let k = kernels.data();
    let up = upstream.data();
    let mut d_in = vec![T::zero(); h * w * c];
    let mut d_k = vec![T::zero(); KERNEL_SIZE * KERNEL_SIZE * c * f];
    let mut d_b = vec![T::zero(); f];

    for y in 0..h {
        for x in 0..w {
            let g = &up[(y * w + x) * f..][..f];
            for (acc, &gv) in d_b.iter_mut().zip(g) {
                *acc = *acc + gv;
            }
            for (tap, iy, ix) in taps(y, x, h, w) {
                let base = (iy * w + ix) * c;
                let kt = &k[tap * c * f..][..c * f];
                let dkt = &mut d_k[tap * c * f..][..c * f];
                for ci in 0..c {
                    let kw = &kt[ci * f..][..f];
                    let dot: T = kw.iter().zip(g).map(|(&a, &b)| a * b).sum();
                    d_in[base + ci] = d_in[base + ci] + dot;
                    let v = src[base + ci];
                    if v != T::zero() {
                        for (acc, &gv) in dkt[ci * f..][..f].iter_mut().zip(g) {
                            *acc = *acc + v * gv;
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::from_vec(&[h, w, c], d_in)?,
        kernels: Tensor::from_vec(kernels.shape(), d_k)?,
        bias: Tensor::from_vec(&[f], d_b)?,
    })
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::NnError;
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_INIT_SD: f64 = 0.01;

/// I.i.d. `Normal(0, sd²)` samples.
///
/// The stream is ChaCha8 seeded with `seed`, sampled through `rand_distr`'s
/// ziggurat normal in `f64` and then rounded to `T`, so `f32` and `f64`
/// tensors built from one seed agree up to rounding.
pub fn gaussian_init<T: Scalar>(shape: &[usize], sd: f64, seed: u64) -> Result<Tensor<T>, NnError> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(NnError::Input(format!("standard deviation must be positive, got {sd}")));
    }
    let normal = Normal::new(0.0, sd).map_err(|e| NnError::Input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Tensor::from_fn(shape, |_| T::of(normal.sample(&mut rng)))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_requested_distribution() {
        let t: Tensor<f64> = gaussian_init(&[10_000], DEFAULT_INIT_SD, 7).unwrap();
        let n = t.len() as f64;
        let mean = t.sum() / n;
        let var = t.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 3.0 * 0.01 / n.sqrt(), "mean {mean}");
        assert!((0.0097..=0.0103).contains(&var.sqrt()), "sd {}", var.sqrt());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a: Tensor<f32> = gaussian_init(&[3, 3, 3, 16], 0.01, 42).unwrap();
        let b: Tensor<f32> = gaussian_init(&[3, 3, 3, 16], 0.01, 42).unwrap();
        let c: Tensor<f32> = gaussian_init(&[3, 3, 3, 16], 0.01, 43).unwrap();
        assert_eq!(
            a.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_non_positive_sd() {
        assert!(gaussian_init::<f32>(&[4], 0.0, 1).is_err());
        assert!(gaussian_init::<f32>(&[4], -0.01, 1).is_err());
        assert!(gaussian_init::<f32>(&[4], f64::NAN, 1).is_err());
    }
}

use fallwatch::Tensor;
use fallwatch_sentinel::presence_score;
use proptest::prelude::*;

/// Independent closed form: |x − (1 − x)| = |1 − 2x|, averaged.
fn inverse_oracle(data: &[f32]) -> f64 {
    data.iter().map(|&x| (1.0 - 2.0 * f64::from(x)).abs()).sum::<f64>() / data.len() as f64
}

#[test]
fn inverse_of_half_mean_ramp() {
    // Values 0, 1/15, …, 1 average to 0.5.
    let img = Tensor::from_fn(&[4, 4, 1], |i| i as f32 / 15.0).unwrap();
    assert!((img.mean() - 0.5).abs() < 1e-6);
    let inv = img.map(|x| 1.0 - x);
    let got = presence_score(&img, &inv).unwrap();
    // Closed form for this ramp: mean of |1 − 2i/15| over i = 0..15 is 8/15.
    assert!((got - 8.0 / 15.0).abs() < 1e-6, "{got}");
    assert!((got - inverse_oracle(img.data())).abs() < 1e-6);
}

#[test]
fn inverse_of_two_level_image_is_one_half() {
    // Half the pixels at 0.25, half at 0.75: mean 0.5, every |1 − 2x| = 0.5.
    let img = Tensor::from_fn(&[6, 6, 3], |i| if i % 2 == 0 { 0.25 } else { 0.75 }).unwrap();
    let got = presence_score(&img, &img.map(|x| 1.0 - x)).unwrap();
    assert!((got - 0.5).abs() < 1e-7);
}

proptest! {
    #[test]
    fn score_is_bounded_symmetric_and_matches_oracle(
        pair in (1usize..6, 1usize..6).prop_flat_map(|(h, w)| (
            prop::collection::vec(0.0f32..=1.0, h * w * 3),
            prop::collection::vec(0.0f32..=1.0, h * w * 3),
            Just((h, w)),
        ))
    ) {
        let (a, b, (h, w)) = pair;
        let ta = Tensor::from_vec(&[h, w, 3], a.clone()).unwrap();
        let tb = Tensor::from_vec(&[h, w, 3], b.clone()).unwrap();
        let s = presence_score(&ta, &tb).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, presence_score(&tb, &ta).unwrap());
        let oracle = a.iter().zip(&b).map(|(x, y)| f64::from((x - y).abs())).sum::<f64>() / a.len() as f64;
        prop_assert!((s - oracle).abs() < 1e-9);
        let inv = ta.map(|x| 1.0 - x);
        prop_assert!((presence_score(&ta, &inv).unwrap() - inverse_oracle(&a)).abs() < 1e-6);
    }
}

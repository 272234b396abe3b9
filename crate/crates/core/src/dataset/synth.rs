//! Procedurally generated labeled frames for tests, demos and smoke runs.
//!
//! Two generators are provided:
//! * [`bright_dark`]: uniformly bright frames labeled fall, dark frames not-fall.
//! * [`silhouette`]: a room (wall, floor, noise) with one person-like
//!   figure, upright for not-fall and lying along the floor for fall.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{encode_ppm, Label, LabeledSample};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    BrightDark,
    Silhouette,
}

/// A uniform frame with light per-pixel noise; fall frames have mean
/// brightness in `[0.6, 0.9]`, not-fall frames in `[0.1, 0.4]`.
pub fn bright_dark_frame(label: Label, size: usize, rng: &mut impl Rng) -> Tensor<f32> {
    let level: f32 = match label {
        Label::Fall => rng.random_range(0.6..0.9),
        Label::NotFall => rng.random_range(0.1..0.4),
    };
    Tensor::from_fn(&[size, size, 3], |_| {
        (level + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0)
    })
    .expect("size is positive")
}

fn color(rng: &mut impl Rng, lo: f32, hi: f32) -> [f32; 3] {
    [
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
    ]
}

/// A room with one figure; see the module docs.
pub fn silhouette_frame(label: Label, size: usize, rng: &mut impl Rng) -> Tensor<f32> {
    let s = size as f32;
    let horizon = s * rng.random_range(0.35..0.55);
    let wall = color(rng, 0.35, 0.75);
    let floor = color(rng, 0.2, 0.6);
    let body = color(rng, 0.0, 1.0);
    let skin = color(rng, 0.55, 0.95);

    // Body ellipse and head disc, in pixel units.
    let long = s * rng.random_range(0.22..0.32);
    let short = s * rng.random_range(0.06..0.09);
    let head = short * rng.random_range(0.9..1.2);
    let (cx, cy, rx, ry, hx, hy) = match label {
        Label::NotFall => {
            let cx = s * rng.random_range(0.25..0.75);
            let cy = (s * rng.random_range(0.72..0.85)) - long;
            (cx, cy, short, long, cx, cy - long - head * 0.8)
        }
        Label::Fall => {
            let cx = s * rng.random_range(0.3..0.7);
            let cy = s * rng.random_range(0.7..0.88);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (cx, cy, long, short, cx + side * (long + head * 0.8), cy)
        }
    };
    let noise = rng.random_range(0.01..0.05f32);

    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            let in_body = ((px - cx) / rx).powi(2) + ((py - cy) / ry).powi(2) <= 1.0;
            let in_head = (px - hx).powi(2) + (py - hy).powi(2) <= head * head;
            let base = if in_head {
                skin
            } else if in_body {
                body
            } else if py < horizon {
                wall
            } else {
                floor
            };
            for c in base {
                data.push((c + rng.random_range(-noise..=noise)).clamp(0.0, 1.0));
            }
        }
    }
    Tensor::from_vec(&[size, size, 3], data).expect("size is positive")
}

fn generate(kind: SceneKind, label: Label, size: usize, rng: &mut impl Rng) -> Tensor<f32> {
    match kind {
        SceneKind::BrightDark => bright_dark_frame(label, size, rng),
        SceneKind::Silhouette => silhouette_frame(label, size, rng),
    }
}

/// `count` samples alternating fall / not-fall, starting with fall.
pub fn samples(kind: SceneKind, count: usize, size: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Fall } else { Label::NotFall };
            let image = generate(kind, label, size, &mut rng);
            LabeledSample::new(format!("synthetic/{label}/{i:05}"), image, label)
        })
        .collect()
}

pub fn bright_dark(count: usize, size: usize, seed: u64) -> Vec<LabeledSample> {
    samples(SceneKind::BrightDark, count, size, seed)
}

pub fn silhouette(count: usize, size: usize, seed: u64) -> Vec<LabeledSample> {
    samples(SceneKind::Silhouette, count, size, seed)
}

/// Writes `per_class` P6 images per class under `root/fall` and
/// `root/not_fall`.
pub fn write_dataset(
    root: impl AsRef<Path>,
    kind: SceneKind,
    per_class: usize,
    size: usize,
    seed: u64,
) -> io::Result<()> {
    let root = root.as_ref();
    for label in [Label::Fall, Label::NotFall] {
        fs::create_dir_all(root.join(label.as_str()))?;
    }
    for (i, s) in samples(kind, per_class * 2, size, seed).iter().enumerate() {
        let path = root.join(s.label.as_str()).join(format!("{:05}.ppm", i / 2));
        let bytes = encode_ppm(&s.image).map_err(|e| io::Error::other(e.to_string()))?;
        fs::write(path, bytes)?;
    }
    Ok(())
}

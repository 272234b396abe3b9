use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, DatasetManifest, Label, LabeledSample, ManifestEntry};

pub const DEFAULT_VAL_FRACTION: f64 = 0.2;
pub const DEFAULT_SPLIT_SEED: u64 = 42;

pub trait Labeled {
    fn label(&self) -> Label;
}

impl Labeled for ManifestEntry {
    fn label(&self) -> Label {
        self.label
    }
}

impl Labeled for LabeledSample {
    fn label(&self) -> Label {
        self.label
    }
}

/// Seeded per-class split into `(train, val)`. Each class contributes
/// `round(n·fraction)` items to validation, at least one and at most `n − 1`.
/// Both halves keep the input order.
pub fn stratified_split<S: Labeled + Clone>(
    items: &[S],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<S>, Vec<S>), DatasetError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DatasetError::Input(format!(
            "validation fraction {val_fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_val = vec![false; items.len()];
    for label in [Label::NotFall, Label::Fall] {
        let mut idx: Vec<usize> = (0..items.len()).filter(|&i| items[i].label() == label).collect();
        if idx.len() < 2 {
            return Err(DatasetError::Input(format!(
                "class {label} has {} sample(s); at least 2 are needed to split",
                idx.len()
            )));
        }
        let n_val = ((idx.len() as f64 * val_fraction).round() as usize).clamp(1, idx.len() - 1);
        idx.shuffle(&mut rng);
        for &i in &idx[..n_val] {
            is_val[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (item, v) in items.iter().zip(is_val) {
        if v {
            val.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    Ok((train, val))
}

impl DatasetManifest {
    pub fn split(&self, val_fraction: f64, seed: u64) -> Result<(DatasetManifest, DatasetManifest), DatasetError> {
        let (t, v) = stratified_split(&self.entries, val_fraction, seed)?;
        Ok((DatasetManifest { entries: t }, DatasetManifest { entries: v }))
    }
}

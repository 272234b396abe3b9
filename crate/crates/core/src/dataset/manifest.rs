use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{load_image, resize_bilinear, DatasetError, Label, LabeledSample};
use crate::fallnet::InputSize;

const IMAGE_EXTENSIONS: [&str; 3] = ["ppm", "pgm", "pnm"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
}

/// Labeled image paths, sorted lexicographically by path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Sorts entries and rejects duplicate paths.
    pub fn new(mut entries: Vec<ManifestEntry>) -> Result<Self, DatasetError> {
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let dupes: BTreeSet<String> = entries
            .windows(2)
            .filter(|w| w[0].path == w[1].path)
            .map(|w| format!("duplicate path {}", w[0].path.display()))
            .collect();
        if !dupes.is_empty() {
            return Err(DatasetError::Ingest {
                offenders: dupes.into_iter().collect(),
            });
        }
        Ok(DatasetManifest { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    /// `(fall, not_fall)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        (self.count(Label::Fall), self.count(Label::NotFall))
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn list_class_dir(dir: &Path, label: Label, offenders: &mut Vec<String>) -> Vec<ManifestEntry> {
    let read = match fs::read_dir(dir) {
        Ok(r) => r,
        Err(e) => {
            offenders.push(format!("{}: {e}", dir.display()));
            return Vec::new();
        }
    };
    let mut out = Vec::new();
    for item in read {
        match item {
            Ok(item) if is_image(&item.path()) => out.push(ManifestEntry {
                path: item.path(),
                label,
            }),
            Ok(item) => log::debug!("skipping non-image {}", item.path().display()),
            Err(e) => offenders.push(format!("{}: {e}", dir.display())),
        }
    }
    out
}

fn parse_csv(root: &Path, text: &str, offenders: &mut Vec<String>) -> Vec<ManifestEntry> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line == "path,label") {
            continue;
        }
        let Some((path, label)) = line.rsplit_once(',') else {
            offenders.push(format!("manifest.csv line {}: expected `path,label`", n + 1));
            continue;
        };
        match label.parse::<Label>() {
            Ok(label) => out.push(ManifestEntry {
                path: root.join(path.trim()),
                label,
            }),
            Err(e) => offenders.push(format!("manifest.csv line {}: {e}", n + 1)),
        }
    }
    out
}

/// Reads `root/manifest.csv` (`path,label` lines, paths relative to `root`)
/// if present, otherwise the `fall/` and `not_fall/` subdirectories.
pub fn load_manifest(root: impl AsRef<Path>) -> Result<DatasetManifest, DatasetError> {
    let root = root.as_ref();
    let mut offenders = Vec::new();
    let csv = root.join("manifest.csv");
    let entries = if csv.is_file() {
        let text = fs::read_to_string(&csv)?;
        parse_csv(root, &text, &mut offenders)
    } else {
        let mut e = list_class_dir(&root.join("fall"), Label::Fall, &mut offenders);
        e.extend(list_class_dir(&root.join("not_fall"), Label::NotFall, &mut offenders));
        e
    };
    for entry in &entries {
        if let Err(e) = fs::File::open(&entry.path) {
            offenders.push(format!("{}: {e}", entry.path.display()));
        }
    }
    let manifest = DatasetManifest::new(entries);
    if let Err(DatasetError::Ingest { offenders: dupes }) = &manifest {
        offenders.extend(dupes.iter().cloned());
    }
    if offenders.is_empty() {
        let m = manifest?;
        for label in [Label::Fall, Label::NotFall] {
            if m.count(label) == 0 {
                offenders.push(format!("class {label} has no images"));
            }
        }
        if offenders.is_empty() {
            return Ok(m);
        }
    }
    Err(DatasetError::Ingest { offenders })
}

/// Decodes every entry and resizes it to `size` when needed.
pub fn load_samples(manifest: &DatasetManifest, size: InputSize) -> Result<Vec<LabeledSample>, DatasetError> {
    let results: Vec<Result<LabeledSample, String>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let shown = entry.path.display().to_string();
            let mut image = load_image(&entry.path).map_err(|e| format!("{shown}: {e}"))?;
            if image.shape() != size.shape() {
                image = resize_bilinear(&image, size.height, size.width).map_err(|e| format!("{shown}: {e}"))?;
            }
            Ok(LabeledSample::new(shown, image, entry.label))
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut offenders = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => offenders.push(e),
        }
    }
    if offenders.is_empty() {
        Ok(samples)
    } else {
        Err(DatasetError::Ingest { offenders })
    }
}

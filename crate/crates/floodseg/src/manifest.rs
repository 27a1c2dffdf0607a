//! Dataset manifests: which images exist, their class, and their masks.
//!
//! A manifest is a JSON file:
//!
//! ```json
//! {"root": "data", "entries": [{"image": "flood/a.png", "label": 1, "mask": "masks/a.png"}]}
//! ```
//!
//! `root` is resolved against the manifest's directory. A dataset directory
//! laid out as `flood/`, `dry/` and `masks/` (masks named after their flood
//! image) can be used in place of a manifest file.

use std::path::{Component, Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{load_image, load_mask};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest root; also the embedding-file key.
    pub image: String,
    /// 1 = flood, 0 = dry.
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Overrides the run seed for the train/test split when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

impl DatasetManifest {
    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.image)
    }

    pub fn mask_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.mask.as_ref().map(|m| self.root.join(m))
    }

    pub fn counts(&self) -> (usize, usize) {
        let flood = self.entries.iter().filter(|e| e.label == 1).count();
        (flood, self.entries.len() - flood)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn list_images(dir: &Path) -> Result<Vec<String>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_owned());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Builds a manifest from `flood/`, `dry/` and `masks/` under `root`.
pub fn from_directories(root: &Path) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    for name in list_images(&root.join("flood"))? {
        let stem = Path::new(&name)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(&name);
        let mask = [name.clone(), format!("{stem}.png")]
            .into_iter()
            .map(|m| format!("masks/{m}"))
            .find(|m| root.join(m).is_file());
        entries.push(ManifestEntry {
            image: format!("flood/{name}"),
            label: 1,
            mask,
        });
    }
    for name in list_images(&root.join("dry"))? {
        entries.push(ManifestEntry {
            image: format!("dry/{name}"),
            label: 0,
            mask: None,
        });
    }
    if entries.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no images under flood/ or dry/",
            root.display()
        )));
    }
    Ok(DatasetManifest {
        root: root.to_owned(),
        entries,
        split_seed: None,
        train_fraction: default_train_fraction(),
    })
}

/// Reads a manifest file, or derives one when `path` is a directory.
/// Does not touch the referenced images.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    if path.is_dir() {
        return from_directories(path);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    if m.root.is_relative() {
        let base = path.parent().unwrap_or(Path::new(""));
        m.root = base.join(&m.root);
    }
    Ok(m)
}

fn stays_under_root(rel: &str) -> bool {
    let p = Path::new(rel);
    !rel.is_empty()
        && p.components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

/// Problems found with one entry.
fn check_entry(m: &DatasetManifest, e: &ManifestEntry, require_masks: bool) -> Vec<String> {
    let mut problems = Vec::new();
    if e.label > 1 {
        problems.push(format!("label must be 0 or 1, got {}", e.label));
    }
    if !stays_under_root(&e.image) {
        problems.push("image path must be relative to the root".to_owned());
        return problems;
    }
    let image = match load_image(&m.image_path(e)) {
        Ok(img) => Some(img),
        Err(err) => {
            problems.push(format!("image: {err}"));
            None
        }
    };
    match &e.mask {
        Some(rel) if !stays_under_root(rel) => {
            problems.push("mask path must be relative to the root".to_owned())
        }
        Some(rel) => match load_mask(&m.root.join(rel)) {
            Ok(mask) => {
                if let Some(img) = &image {
                    if (img.width(), img.height()) != (mask.width(), mask.height()) {
                        problems.push(format!(
                            "mask is {}x{} but image is {}x{}",
                            mask.width(),
                            mask.height(),
                            img.width(),
                            img.height()
                        ));
                    }
                }
            }
            Err(err) => problems.push(format!("mask: {err}")),
        },
        None if require_masks && e.label == 1 => {
            problems.push("flood entry has no mask (required for segmentation)".to_owned())
        }
        None => {}
    }
    problems
}

/// Reads a manifest and verifies that every image and mask decodes, masks
/// are binary and match their image, and (when `require_masks`) every flood
/// entry has a mask. All problems are reported together, one line per entry.
pub fn ingest(path: &Path, require_masks: bool) -> Result<DatasetManifest> {
    let m = read_manifest(path)?;
    if !(m.train_fraction > 0.0 && m.train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train_fraction must be in (0, 1), got {}",
            m.train_fraction
        )));
    }
    let problems: Vec<String> = m
        .entries
        .par_iter()
        .map(|e| {
            check_entry(&m, e, require_masks)
                .into_iter()
                .map(|p| format!("{}: {p}", e.image))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    let dupes: Vec<String> = m
        .entries
        .iter()
        .filter(|e| !seen.insert(&e.image))
        .map(|e| format!("{}: listed more than once", e.image))
        .collect();
    let problems: Vec<String> = problems.into_iter().chain(dupes).collect();
    if !problems.is_empty() {
        return Err(Error::Validation(format!(
            "{} invalid manifest entries:\n  {}",
            problems.len(),
            problems.join("\n  ")
        )));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
}

/// Seeded shuffle; the first `ceil(fraction * n)` entries train (capped so
/// at least one entry is left to test).
pub fn split(entries: &[ManifestEntry], seed: u64, fraction: f64) -> Result<Split> {
    let n = entries.len();
    if n < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 entries to split, got {n}"
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // the epsilon keeps exact products such as 0.8 * 5 from rounding up
    let n_train = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n - 1);
    Ok(Split {
        train: order[..n_train]
            .iter()
            .map(|&i| entries[i].clone())
            .collect(),
        test: order[n_train..]
            .iter()
            .map(|&i| entries[i].clone())
            .collect(),
    })
}

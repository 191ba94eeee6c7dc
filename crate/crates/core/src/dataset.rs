//! Dot annotations, dataset manifests, per-cell ground truth and cross-validation folds.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{decode_image, CellRect, DecodeError, GrayImage};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("annotation parse error: {0}")]
    Parse(String),
    #[error("annotation '{image_id}': point {index} ({x}, {y}) lies outside the {width}x{height} image")]
    PointOutOfBounds { image_id: String, index: usize, x: f64, y: f64, width: usize, height: usize },
    #[error("annotation '{image_id}' is {ann_w}x{ann_h} but its image is {img_w}x{img_h}")]
    SizeMismatch { image_id: String, ann_w: usize, ann_h: usize, img_w: usize, img_h: usize },
    #[error("duplicate image id '{0}'")]
    DuplicateId(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot decode {path}: {source}")]
    Decode { path: PathBuf, source: DecodeError },
    #[error("need k >= 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("cannot split {ids} images into {k} folds")]
    NotEnoughImages { ids: usize, k: usize },
}

/// Person locations for one image; `x` is the column, origin top-left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DotAnnotation {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub points: Vec<[f64; 2]>,
}

impl DotAnnotation {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for (index, &[x, y]) in self.points.iter().enumerate() {
            let inside = x.is_finite()
                && y.is_finite()
                && x >= 0.0
                && y >= 0.0
                && x < self.width as f64
                && y < self.height as f64;
            if !inside {
                return Err(DatasetError::PointOutOfBounds {
                    image_id: self.image_id.clone(),
                    index,
                    x,
                    y,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(())
    }
}

/// Parses and validates an annotation file.
pub fn load_annotation(bytes: &[u8]) -> Result<DotAnnotation, DatasetError> {
    let ann: DotAnnotation = serde_json::from_slice(bytes).map_err(|e| DatasetError::Parse(e.to_string()))?;
    ann.validate()?;
    Ok(ann)
}

/// Dots per cell under half-open containment. Dots outside every cell are dropped,
/// so for a grid that tiles the image the counts sum to the annotation size.
pub fn cell_ground_truth(ann: &DotAnnotation, cells: &[CellRect]) -> Vec<usize> {
    let mut counts = vec![0; cells.len()];
    for &[x, y] in &ann.points {
        if let Some(i) = cells.iter().position(|c| c.contains_point(x, y)) {
            counts[i] += 1;
        }
    }
    counts
}

/// Like [`cell_ground_truth`] but every containing cell is credited, for
/// overlapping training windows.
pub fn window_ground_truth(ann: &DotAnnotation, windows: &[CellRect]) -> Vec<usize> {
    windows
        .iter()
        .map(|w| ann.points.iter().filter(|&&[x, y]| w.contains_point(x, y)).count())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub annotation: PathBuf,
}

/// `root` is resolved against the manifest file's directory when relative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

/// An image with its validated annotation.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image: GrayImage<f64>,
    pub annotation: DotAnnotation,
}

fn read(path: &Path) -> Result<Vec<u8>, DatasetError> {
    std::fs::read(path).map_err(|source| DatasetError::Io { path: path.to_owned(), source })
}

impl DatasetManifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self, DatasetError> {
        serde_json::from_slice(bytes).map_err(|e| DatasetError::Parse(e.to_string()))
    }

    /// Reads the manifest and every image and annotation it lists.
    pub fn load(path: &Path) -> Result<(Self, Vec<Sample>), DatasetError> {
        let mut manifest = Self::from_json(&read(path)?)?;
        if manifest.root.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            manifest.root = base.join(&manifest.root);
        }
        let samples = manifest.load_samples()?;
        Ok((manifest, samples))
    }

    pub fn load_samples(&self) -> Result<Vec<Sample>, DatasetError> {
        let mut seen = HashSet::new();
        let mut samples = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let img_path = self.root.join(&entry.image);
            let ann_path = self.root.join(&entry.annotation);
            let image = decode_image(&read(&img_path)?)
                .map_err(|source| DatasetError::Decode { path: img_path.clone(), source })?;
            let annotation = load_annotation(&read(&ann_path)?)?;
            if annotation.width != image.width() || annotation.height != image.height() {
                return Err(DatasetError::SizeMismatch {
                    image_id: annotation.image_id.clone(),
                    ann_w: annotation.width,
                    ann_h: annotation.height,
                    img_w: image.width(),
                    img_h: image.height(),
                });
            }
            if !seen.insert(annotation.image_id.clone()) {
                return Err(DatasetError::DuplicateId(annotation.image_id));
            }
            samples.push(Sample { id: annotation.image_id.clone(), image, annotation });
        }
        Ok(samples)
    }
}

/// Seeded assignment of image ids to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
    /// Ids in shuffled order; id `order[i]` belongs to fold `i % k`.
    pub order: Vec<String>,
}

impl FoldSplit {
    /// Ids of fold `fold` in shuffled order.
    pub fn fold(&self, fold: usize) -> Vec<&str> {
        self.order.iter().skip(fold).step_by(self.k).map(String::as_str).collect()
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }
}

/// Shuffles the ids with a seeded generator and deals them round-robin.
pub fn make_folds(ids: &[String], k: usize, seed: u64) -> Result<FoldSplit, DatasetError> {
    if k < 2 {
        return Err(DatasetError::TooFewFolds(k));
    }
    if ids.len() < k {
        return Err(DatasetError::NotEnoughImages { ids: ids.len(), k });
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(DatasetError::DuplicateId(dup.clone()));
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignment = order.iter().enumerate().map(|(i, id)| (id.clone(), i % k)).collect();
    Ok(FoldSplit { k, seed, assignment, order })
}

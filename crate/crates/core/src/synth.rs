//! Synthetic blob crowds with exact dot annotations.
//!
//! People are Gaussian blobs placed on a jittered lattice whose spacing and blob
//! size grow toward the bottom of the frame, a crude perspective. The top of each
//! image is an empty band so every image also has crowd-free cells.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, DotAnnotation, ManifestEntry};
use crate::imaging::{encode_pgm, GrayImage};
use crate::pipeline::{write_atomic, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_images: usize,
    pub min_dots: usize,
    pub max_dots: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Image ids are `<prefix>_<index>`.
    pub prefix: String,
}

impl SynthParams {
    pub fn new(n_images: usize, min_dots: usize, max_dots: usize, seed: u64) -> Self {
        Self { n_images, min_dots, max_dots, width: 256, height: 256, seed, prefix: "img".into() }
    }

    fn check(&self) -> Result<(), String> {
        if self.min_dots > self.max_dots {
            return Err(format!("dot range {}..{} is empty", self.min_dots, self.max_dots));
        }
        if self.width < 32 || self.height < 32 {
            return Err(format!("synthetic images must be at least 32x32, got {}x{}", self.width, self.height));
        }
        // One person per 36 px of crowd area is already shoulder to shoulder.
        let capacity = self.width * self.height * 7 / 10 / 36;
        if self.max_dots > capacity {
            return Err(format!("{} dots do not fit a {}x{} image", self.max_dots, self.width, self.height));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image: GrayImage<f64>,
    pub annotation: DotAnnotation,
}

const BACKGROUND: f64 = 0.2;
const NOISE_STD: f64 = 0.03;
const MAX_SKY: f64 = 0.3;

fn perspective(y: f64, height: f64) -> f64 {
    0.6 + 0.8 * (y / height).clamp(0.0, 1.0)
}

/// Jittered lattice sites below `top`, spacing `base * perspective(y)`.
fn lattice(rng: &mut ChaCha8Rng, width: f64, height: f64, top: f64, base: f64) -> Vec<[f64; 2]> {
    let mut sites = Vec::new();
    let mut y = top + 0.5 * base * perspective(top, height);
    while y < height {
        let step = base * perspective(y, height);
        let mut x = rng.gen_range(0.0..step);
        while x < width {
            let jx = x + rng.gen_range(-0.25..0.25) * step;
            let jy = y + rng.gen_range(-0.25..0.25) * step;
            if (0.0..width).contains(&jx) && (top..height).contains(&jy) {
                sites.push([jx, jy]);
            }
            x += step;
        }
        y += step;
    }
    sites
}

fn generate_one(rng: &mut ChaCha8Rng, p: &SynthParams, id: String) -> SynthImage {
    let (w, h) = (p.width as f64, p.height as f64);
    let n = rng.gen_range(p.min_dots..=p.max_dots);
    let top = (rng.gen_range(0.0..MAX_SKY) * h).floor();
    let area = w * (h - top);
    let mut base = (0.8 * area / n.max(1) as f64).sqrt();
    let mut sites = lattice(rng, w, h, top, base);
    while sites.len() < n {
        base *= 0.95;
        sites = lattice(rng, w, h, top, base);
    }
    sites.shuffle(rng);
    sites.truncate(n);
    sites.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));

    let noise = Normal::new(0.0, NOISE_STD).expect("valid noise");
    let mut data: Vec<f64> = (0..p.width * p.height).map(|_| BACKGROUND + noise.sample(rng)).collect();
    for &[x, y] in &sites {
        let scale = perspective(y, h);
        let sigma = (1.6 * scale).min(0.35 * base * scale).max(1.0);
        let amp = rng.gen_range(0.5..0.8);
        let reach = (4.0 * sigma).ceil() as isize;
        let (cx, cy) = (x.floor() as isize, y.floor() as isize);
        for r in (cy - reach).max(0)..=(cy + reach).min(p.height as isize - 1) {
            for c in (cx - reach).max(0)..=(cx + reach).min(p.width as isize - 1) {
                let dx = c as f64 + 0.5 - x;
                let dy = r as f64 + 0.5 - y;
                data[r as usize * p.width + c as usize] += amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    // Quantize now so the in-memory image equals the decoded file.
    for v in data.iter_mut() {
        *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
    }
    let image = GrayImage::new(p.width, p.height, data).expect("finite synthetic image");
    let annotation = DotAnnotation { image_id: id, width: p.width, height: p.height, points: sites };
    SynthImage { image, annotation }
}

/// Generates `p.n_images` images from one seeded stream.
pub fn generate(p: &SynthParams) -> Result<Vec<SynthImage>, String> {
    p.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    Ok((0..p.n_images).map(|i| generate_one(&mut rng, p, format!("{}_{i:04}", p.prefix))).collect())
}

/// Writes `images/*.pgm`, `annotations/*.json` and `manifest.json` under `dir`
/// and returns the manifest path.
pub fn write_dataset(dir: &Path, p: &SynthParams) -> Result<PathBuf, PipelineError> {
    let images = generate(p).map_err(|m| PipelineError::Stage { stage: "synth", message: m })?;
    let mut entries = Vec::with_capacity(images.len());
    for s in &images {
        let id = &s.annotation.image_id;
        let image = PathBuf::from("images").join(format!("{id}.pgm"));
        let annotation = PathBuf::from("annotations").join(format!("{id}.json"));
        write_atomic(&dir.join(&image), &encode_pgm(&s.image))?;
        let ann = serde_json::to_vec_pretty(&s.annotation).expect("annotation serializes");
        write_atomic(&dir.join(&annotation), &ann)?;
        entries.push(ManifestEntry { image, annotation });
    }
    let manifest = DatasetManifest { root: PathBuf::from("."), entries };
    let path = dir.join("manifest.json");
    write_atomic(&path, &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))?;
    Ok(path)
}

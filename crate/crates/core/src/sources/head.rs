//! Sliding-window head detector: one linear filter over gradient-orientation
//! histograms, evaluated on a small scale ladder with greedy NMS.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SourceError;
use crate::imaging::Patch;
use crate::scalar::Real;

pub const FEATURE_VERSION: &str = "signed-hog-4x4x8-v1";
const CELLS: usize = 4;
const BINS: usize = 8;
pub const FEATURE_DIM: usize = CELLS * CELLS * BINS;
pub const MIN_EXAMPLES: usize = 10;
pub const NMS_IOU: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadParams {
    /// Side of the base detection window in pixels.
    pub window: usize,
    /// Minimum filter score (logit) for a detection.
    pub threshold: f64,
    /// Window magnifications relative to `window`.
    pub scales: Vec<f64>,
}

impl Default for HeadParams {
    fn default() -> Self {
        Self { window: 16, threshold: -1.0, scales: vec![1.0, 1.5, 2.25] }
    }
}

/// Linear scorer `w·φ(window) + b` over [`window_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadFilter<T = f64> {
    pub version: String,
    pub window: usize,
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> HeadFilter<T> {
    pub fn score(&self, features: &[T]) -> T {
        self.weights.iter().zip(features).fold(self.bias, |acc, (&w, &x)| acc + w * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<T = f64> {
    /// Window center, column.
    pub x: T,
    /// Window center, row.
    pub y: T,
    /// Window side in patch pixels.
    pub scale: T,
    pub confidence: T,
}

impl<T: Real> Detection<T> {
    pub fn iou(&self, other: &Detection<T>) -> T {
        let half = T::lit(0.5);
        let (a0x, a0y, a1x, a1y) =
            (self.x - self.scale * half, self.y - self.scale * half, self.x + self.scale * half, self.y + self.scale * half);
        let (b0x, b0y, b1x, b1y) = (
            other.x - other.scale * half,
            other.y - other.scale * half,
            other.x + other.scale * half,
            other.y + other.scale * half,
        );
        let iw = (a1x.min(b1x) - a0x.max(b0x)).max(T::zero());
        let ih = (a1y.min(b1y) - a0y.max(b0y)).max(T::zero());
        let inter = iw * ih;
        let union = self.scale * self.scale + other.scale * other.scale - inter;
        if union > T::zero() {
            inter / union
        } else {
            T::zero()
        }
    }
}

/// Per-cell head evidence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadSourceOutput<T = f64> {
    pub eta_head: usize,
    pub scale_mean: T,
    pub scale_var: T,
    pub conf_mean: T,
    pub conf_var: T,
    /// No detections; all statistics are zero.
    pub empty: bool,
}

/// Bilinear resampling of a patch to `(height, width)` at pixel centers.
fn resample<T: Real>(src: &[T], sh: usize, sw: usize, height: usize, width: usize) -> Vec<T> {
    if (sh, sw) == (height, width) {
        return src.to_vec();
    }
    let (fy, fx) = (sh as f64 / height as f64, sw as f64 / width as f64);
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        let y = ((r as f64 + 0.5) * fy - 0.5).clamp(0.0, (sh - 1) as f64);
        let (y0, ty) = (y.floor() as usize, y - y.floor());
        let y1 = (y0 + 1).min(sh - 1);
        for c in 0..width {
            let x = ((c as f64 + 0.5) * fx - 0.5).clamp(0.0, (sw - 1) as f64);
            let (x0, tx) = (x.floor() as usize, x - x.floor());
            let x1 = (x0 + 1).min(sw - 1);
            let v = src[y0 * sw + x0].to_f64_lossy() * (1.0 - ty) * (1.0 - tx)
                + src[y0 * sw + x1].to_f64_lossy() * (1.0 - ty) * tx
                + src[y1 * sw + x0].to_f64_lossy() * ty * (1.0 - tx)
                + src[y1 * sw + x1].to_f64_lossy() * ty * tx;
            out.push(T::lit(v));
        }
    }
    out
}

/// Gradient magnitude and signed orientation bin for every pixel of an image plane.
fn gradient_field<T: Real>(v: &[T], h: usize, w: usize) -> (Vec<T>, Vec<usize>) {
    let mut mag = vec![T::zero(); h * w];
    let mut bin = vec![0usize; h * w];
    for r in 0..h {
        for c in 0..w {
            let gx = v[r * w + (c + 1).min(w - 1)] - v[r * w + c.saturating_sub(1)];
            let gy = v[(r + 1).min(h - 1) * w + c] - v[r.saturating_sub(1) * w + c];
            let m = gx.hypot(gy);
            mag[r * w + c] = m;
            let a = gy.to_f64_lossy().atan2(gx.to_f64_lossy()).rem_euclid(std::f64::consts::TAU);
            bin[r * w + c] = ((a / std::f64::consts::TAU * BINS as f64) as usize).min(BINS - 1);
        }
    }
    (mag, bin)
}

/// L2-normalized 4x4x8 histogram of the window at `(row, col)` of side `window`.
fn histogram_at<T: Real>(mag: &[T], bin: &[usize], w: usize, row: usize, col: usize, window: usize) -> Vec<T> {
    let mut f = vec![T::zero(); FEATURE_DIM];
    for r in 0..window {
        let cr = (r * CELLS / window).min(CELLS - 1);
        for c in 0..window {
            let cc = (c * CELLS / window).min(CELLS - 1);
            let i = (row + r) * w + col + c;
            let k = (cr * CELLS + cc) * BINS + bin[i];
            f[k] = f[k] + mag[i];
        }
    }
    let norm = f.iter().map(|&v| v * v).sum::<T>().sqrt();
    if norm > T::lit(1e-12) {
        f.iter_mut().for_each(|v| *v = *v / norm);
    } else {
        f.iter_mut().for_each(|v| *v = T::zero());
    }
    f
}

/// Features of a whole patch resampled to `window x window`. All-zero for a
/// featureless (constant) patch.
pub fn window_features<T: Real>(p: &Patch<T>, window: usize) -> Vec<T> {
    let v = resample(p.data(), p.height(), p.width(), window, window);
    let (mag, bin) = gradient_field(&v, window, window);
    histogram_at(&mag, &bin, window, 0, 0, window)
}

/// L2-regularized logistic regression by full-batch gradient descent from zero.
/// When one class exceeds `max_per_class` it is subsampled with `seed`.
pub fn train_head_filter<T: Real>(
    positives: &[Patch<T>],
    negatives: &[Patch<T>],
    window: usize,
    max_per_class: usize,
    seed: u64,
) -> Result<HeadFilter<T>, SourceError> {
    if window < CELLS {
        return Err(SourceError::InvalidParameter(format!("head window {window} is too small")));
    }
    for (name, set) in [("head", positives), ("background", negatives)] {
        if set.len() < MIN_EXAMPLES {
            return Err(SourceError::InsufficientData(format!(
                "need at least {MIN_EXAMPLES} {name} examples, found {}",
                set.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |set: &[Patch<T>]| -> Vec<Vec<T>> {
        let mut idx: Vec<usize> = (0..set.len()).collect();
        if idx.len() > max_per_class {
            idx.shuffle(&mut rng);
            idx.truncate(max_per_class);
            idx.sort_unstable();
        }
        idx.into_iter().map(|i| window_features(&set[i], window)).collect()
    };
    let pos = pick(positives);
    let neg = pick(negatives);

    let lambda = 1e-3;
    let step = 2.0;
    let iterations = 400;
    let n = (pos.len() + neg.len()) as f64;
    let mut w = vec![0.0f64; FEATURE_DIM];
    let mut b = 0.0f64;
    let sigmoid = |s: f64| 1.0 / (1.0 + (-s).exp());
    for _ in 0..iterations {
        // Per-class accumulation keeps the two halves exactly cancelling on mirrored data.
        let mut grad_w = [vec![0.0f64; FEATURE_DIM], vec![0.0f64; FEATURE_DIM]];
        let mut grad_b = [0.0f64; 2];
        for (class, (set, label)) in [(&pos, 1.0), (&neg, 0.0)].into_iter().enumerate() {
            for x in set.iter() {
                let s = b + w.iter().zip(x).map(|(wi, xi)| wi * xi.to_f64_lossy()).sum::<f64>();
                let e = sigmoid(s) - label;
                for (g, xi) in grad_w[class].iter_mut().zip(x) {
                    *g += e * xi.to_f64_lossy();
                }
                grad_b[class] += e;
            }
        }
        for (i, wi) in w.iter_mut().enumerate() {
            *wi -= step * ((grad_w[0][i] + grad_w[1][i]) / n + lambda * *wi);
        }
        b -= step * (grad_b[0] + grad_b[1]) / n;
    }
    Ok(HeadFilter {
        version: FEATURE_VERSION.to_string(),
        window,
        weights: w.into_iter().map(T::lit).collect(),
        bias: T::lit(b),
    })
}

/// Multi-scale sliding window (stride = window / 4 at every scale), threshold,
/// then greedy NMS discarding boxes with IoU above 0.3 against a stronger one.
/// Windows without any gradient energy are never reported.
pub fn detect_heads<T: Real>(p: &Patch<T>, filter: &HeadFilter<T>, threshold: T, scales: &[f64]) -> Vec<Detection<T>> {
    let window = filter.window;
    let stride = (window / 4).max(1);
    let mut candidates = Vec::new();
    for &s in scales {
        if !(s > 0.0) {
            continue;
        }
        let (sh, sw) = ((p.height() as f64 / s).floor() as usize, (p.width() as f64 / s).floor() as usize);
        if sh < window || sw < window {
            continue;
        }
        let plane = resample(p.data(), p.height(), p.width(), sh, sw);
        let (mag, bin) = gradient_field(&plane, sh, sw);
        let mut row = 0;
        while row + window <= sh {
            let mut col = 0;
            while col + window <= sw {
                let f = histogram_at(&mag, &bin, sw, row, col, window);
                if f.iter().any(|&v| v != T::zero()) {
                    let score = filter.score(&f);
                    if score >= threshold {
                        let half = window as f64 / 2.0;
                        candidates.push(Detection {
                            x: T::lit((col as f64 + half) * s),
                            y: T::lit((row as f64 + half) * s),
                            scale: T::lit(window as f64 * s),
                            confidence: score,
                        });
                    }
                }
                col += stride;
            }
            row += stride;
        }
    }
    non_maximum_suppression(candidates, T::lit(NMS_IOU))
}

/// Greedy NMS by descending confidence; equal scores keep discovery order.
pub fn non_maximum_suppression<T: Real>(mut dets: Vec<Detection<T>>, max_iou: T) -> Vec<Detection<T>> {
    dets.sort_by(|a, b| b.confidence.partial_cmp(&a.confidence).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<Detection<T>> = Vec::new();
    for d in dets {
        if kept.iter().all(|k| k.iou(&d) <= max_iou) {
            kept.push(d);
        }
    }
    kept
}

/// Count and population moments of detection scales and confidences.
pub fn head_stats<T: Real>(dets: &[Detection<T>]) -> HeadSourceOutput<T> {
    if dets.is_empty() {
        return HeadSourceOutput { empty: true, ..HeadSourceOutput::default() };
    }
    let n = T::from_usize_lossy(dets.len());
    let mean_var = |f: &dyn Fn(&Detection<T>) -> T| -> (T, T) {
        let mean = dets.iter().map(f).sum::<T>() / n;
        let var = dets.iter().map(|d| (f(d) - mean) * (f(d) - mean)).sum::<T>() / n;
        (mean, var)
    };
    let (scale_mean, scale_var) = mean_var(&|d| d.scale);
    let (conf_mean, conf_var) = mean_var(&|d| d.confidence);
    HeadSourceOutput { eta_head: dets.len(), scale_mean, scale_var, conf_mean, conf_var, empty: false }
}

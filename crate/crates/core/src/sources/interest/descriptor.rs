//! Difference-of-Gaussians keypoints with 4x4x8 gradient-orientation descriptors.

use crate::imaging::Patch;
use crate::scalar::Real;

pub const DESCRIPTOR_LEN: usize = 128;
pub const DESCRIPTOR_VERSION: &str = "dog-grad-4x4x8-v1";

const OCTAVES: usize = 3;
const INTERVALS: usize = 3;
const BASE_SIGMA: f64 = 1.6;
const INPUT_SIGMA: f64 = 0.5;
const CONTRAST_THRESHOLD: f64 = 0.01;
const EDGE_RATIO: f64 = 10.0;
const MIN_OCTAVE_SIDE: usize = 8;
const ORI_BINS: usize = 36;
const GRID: usize = 4;
const ORI_PER_CELL: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor<T = f64> {
    /// Column in patch pixels.
    pub x: T,
    /// Row in patch pixels.
    pub y: T,
    /// Gaussian scale of the detection in patch pixels.
    pub scale: T,
    pub orientation: T,
    /// Unit-norm (or all-zero) 128-vector.
    pub vector: Vec<T>,
}

struct Plane<T> {
    h: usize,
    w: usize,
    v: Vec<T>,
}

impl<T: Real> Plane<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.v[r * self.w + c]
    }
}

#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

fn gaussian_kernel<T: Real>(sigma: f64) -> Vec<T> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let raw: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|k| T::lit(k / sum)).collect()
}

fn blur<T: Real>(p: &Plane<T>, sigma: f64) -> Plane<T> {
    let k = gaussian_kernel::<T>(sigma);
    let r = (k.len() / 2) as isize;
    let (h, w) = (p.h, p.w);
    let mut tmp = vec![T::zero(); h * w];
    for row in 0..h {
        for c in 0..w {
            let mut acc = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                acc = acc + kv * p.v[row * w + mirror(c as isize + i as isize - r, w)];
            }
            tmp[row * w + c] = acc;
        }
    }
    let mut out = vec![T::zero(); h * w];
    for row in 0..h {
        for c in 0..w {
            let mut acc = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                acc = acc + kv * tmp[mirror(row as isize + i as isize - r, h) * w + c];
            }
            out[row * w + c] = acc;
        }
    }
    Plane { h, w, v: out }
}

fn downsample<T: Real>(p: &Plane<T>) -> Plane<T> {
    let (h, w) = (p.h / 2, p.w / 2);
    let mut v = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            v.push(p.at(2 * r, 2 * c));
        }
    }
    Plane { h, w, v }
}

struct Octave<T> {
    gauss: Vec<Plane<T>>,
    dog: Vec<Plane<T>>,
}

fn scale_space<T: Real>(p: &Patch<T>) -> Vec<Octave<T>> {
    let k = 2f64.powf(1.0 / INTERVALS as f64);
    let sigmas: Vec<f64> = (0..INTERVALS + 3).map(|i| BASE_SIGMA * k.powi(i as i32)).collect();
    let mut base = blur(
        &Plane { h: p.height(), w: p.width(), v: p.data().to_vec() },
        (BASE_SIGMA * BASE_SIGMA - INPUT_SIGMA * INPUT_SIGMA).sqrt(),
    );
    let mut octaves = Vec::new();
    for _ in 0..OCTAVES {
        if base.h < MIN_OCTAVE_SIDE || base.w < MIN_OCTAVE_SIDE {
            break;
        }
        let mut gauss = vec![base];
        for i in 1..sigmas.len() {
            let inc = (sigmas[i] * sigmas[i] - sigmas[i - 1] * sigmas[i - 1]).sqrt();
            let next = blur(&gauss[i - 1], inc);
            gauss.push(next);
        }
        let dog = gauss
            .windows(2)
            .map(|g| Plane { h: g[0].h, w: g[0].w, v: g[1].v.iter().zip(&g[0].v).map(|(&a, &b)| a - b).collect() })
            .collect();
        base = downsample(&gauss[INTERVALS]);
        octaves.push(Octave { gauss, dog });
    }
    octaves
}

fn is_extremum<T: Real>(dog: &[Plane<T>], layer: usize, r: usize, c: usize) -> bool {
    let v = dog[layer].at(r, c);
    let maximum = v > T::zero();
    for plane in &dog[layer - 1..=layer + 1] {
        for rr in r - 1..=r + 1 {
            for cc in c - 1..=c + 1 {
                if std::ptr::eq(plane, &dog[layer]) && rr == r && cc == c {
                    continue;
                }
                let n = plane.at(rr, cc);
                if (maximum && n >= v) || (!maximum && n <= v) {
                    return false;
                }
            }
        }
    }
    true
}

fn passes_edge_test<T: Real>(d: &Plane<T>, r: usize, c: usize) -> bool {
    let v = d.at(r, c);
    let dxx = d.at(r, c + 1) + d.at(r, c - 1) - v - v;
    let dyy = d.at(r + 1, c) + d.at(r - 1, c) - v - v;
    let dxy = (d.at(r + 1, c + 1) - d.at(r + 1, c - 1) - d.at(r - 1, c + 1) + d.at(r - 1, c - 1)) * T::lit(0.25);
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det > T::zero() && tr * tr * T::lit(EDGE_RATIO) < T::lit((EDGE_RATIO + 1.0).powi(2)) * det
}

#[inline]
fn grad_at<T: Real>(g: &Plane<T>, r: usize, c: usize) -> (T, T) {
    let dx = g.at(r, c + 1) - g.at(r, c - 1);
    let dy = g.at(r + 1, c) - g.at(r - 1, c);
    ((dx * dx + dy * dy).sqrt(), dy.atan2(dx))
}

fn dominant_orientation<T: Real>(g: &Plane<T>, r: usize, c: usize, sigma: f64) -> T {
    let ori_sigma = 1.5 * sigma;
    let radius = (3.0 * ori_sigma).round() as isize;
    let mut hist = [0.0f64; ORI_BINS];
    for dr in -radius..=radius {
        for dc in -radius..=radius {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            if rr < 1 || cc < 1 || rr >= g.h as isize - 1 || cc >= g.w as isize - 1 {
                continue;
            }
            let (mag, ang) = grad_at(g, rr as usize, cc as usize);
            let weight = (-((dr * dr + dc * dc) as f64) / (2.0 * ori_sigma * ori_sigma)).exp();
            let a = ang.to_f64_lossy().rem_euclid(std::f64::consts::TAU);
            let bin = ((a / std::f64::consts::TAU * ORI_BINS as f64).floor() as usize).min(ORI_BINS - 1);
            hist[bin] += weight * mag.to_f64_lossy();
        }
    }
    let smoothed: Vec<f64> = (0..ORI_BINS)
        .map(|i| {
            let prev = hist[(i + ORI_BINS - 1) % ORI_BINS];
            let next = hist[(i + 1) % ORI_BINS];
            0.25 * prev + 0.5 * hist[i] + 0.25 * next
        })
        .collect();
    let mut best = 0;
    for i in 1..ORI_BINS {
        if smoothed[i] > smoothed[best] {
            best = i;
        }
    }
    let (l, m, rgt) = (smoothed[(best + ORI_BINS - 1) % ORI_BINS], smoothed[best], smoothed[(best + 1) % ORI_BINS]);
    let denom = l - 2.0 * m + rgt;
    let offset = if denom.abs() > 1e-300 { 0.5 * (l - rgt) / denom } else { 0.0 };
    T::lit((best as f64 + 0.5 + offset) * std::f64::consts::TAU / ORI_BINS as f64)
}

fn describe<T: Real>(g: &Plane<T>, r: usize, c: usize, sigma: f64, theta: T) -> Vec<T> {
    let hist_width = 3.0 * sigma;
    let radius = (hist_width * std::f64::consts::SQRT_2 * (GRID as f64 + 1.0) * 0.5).round() as isize;
    let (sin_t, cos_t) = theta.to_f64_lossy().sin_cos();
    let weight_sigma = 0.5 * GRID as f64;
    let mut hist = vec![0.0f64; GRID * GRID * ORI_PER_CELL];
    for dr in -radius..=radius {
        for dc in -radius..=radius {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            if rr < 1 || cc < 1 || rr >= g.h as isize - 1 || cc >= g.w as isize - 1 {
                continue;
            }
            let x_rot = (cos_t * dc as f64 + sin_t * dr as f64) / hist_width;
            let y_rot = (-sin_t * dc as f64 + cos_t * dr as f64) / hist_width;
            let rbin = y_rot + GRID as f64 / 2.0 - 0.5;
            let cbin = x_rot + GRID as f64 / 2.0 - 0.5;
            if rbin <= -1.0 || rbin >= GRID as f64 || cbin <= -1.0 || cbin >= GRID as f64 {
                continue;
            }
            let (mag, ang) = grad_at(g, rr as usize, cc as usize);
            let w = (-(x_rot * x_rot + y_rot * y_rot) / (2.0 * weight_sigma * weight_sigma)).exp();
            let mag = mag.to_f64_lossy() * w;
            let rel = (ang.to_f64_lossy() - theta.to_f64_lossy()).rem_euclid(std::f64::consts::TAU);
            let obin = rel / std::f64::consts::TAU * ORI_PER_CELL as f64;

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            for (dri, wr) in [(0, 1.0 - fr), (1, fr)] {
                let ri = r0 as isize + dri;
                if ri < 0 || ri >= GRID as isize {
                    continue;
                }
                for (dci, wc) in [(0, 1.0 - fc), (1, fc)] {
                    let ci = c0 as isize + dci;
                    if ci < 0 || ci >= GRID as isize {
                        continue;
                    }
                    for (doi, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let oi = (o0 as usize + doi) % ORI_PER_CELL;
                        hist[(ri as usize * GRID + ci as usize) * ORI_PER_CELL + oi] += mag * wr * wc * wo;
                    }
                }
            }
        }
    }
    normalize(&mut hist);
    hist.iter_mut().for_each(|v| *v = v.min(0.2));
    normalize(&mut hist);
    hist.into_iter().map(T::lit).collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Detects DoG extrema over three octaves and describes each with one dominant
/// orientation. Output order is octave, layer, then scan order.
pub fn extract_descriptors<T: Real>(p: &Patch<T>) -> Vec<Descriptor<T>> {
    let k = 2f64.powf(1.0 / INTERVALS as f64);
    let mut out = Vec::new();
    for (o, octave) in scale_space(p).iter().enumerate() {
        let step = (1usize << o) as f64;
        for layer in 1..=INTERVALS {
            let d = &octave.dog[layer];
            if d.h < 3 || d.w < 3 {
                continue;
            }
            let sigma_oct = BASE_SIGMA * k.powi(layer as i32);
            for r in 1..d.h - 1 {
                for c in 1..d.w - 1 {
                    let v = d.at(r, c);
                    if v.abs() <= T::lit(CONTRAST_THRESHOLD) || !is_extremum(&octave.dog, layer, r, c) {
                        continue;
                    }
                    if !passes_edge_test(d, r, c) {
                        continue;
                    }
                    let g = &octave.gauss[layer];
                    let theta = dominant_orientation(g, r, c, sigma_oct);
                    let vector = describe(g, r, c, sigma_oct, theta);
                    out.push(Descriptor {
                        x: T::lit(c as f64 * step),
                        y: T::lit(r as f64 * step),
                        scale: T::lit(sigma_oct * step),
                        orientation: theta,
                        vector,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(w: usize, h: usize, centers: &[(f64, f64)], sigma: f64) -> Patch<f64> {
        Patch::from_fn(w, h, |r, c| {
            centers
                .iter()
                .map(|&(cy, cx)| {
                    let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                    0.8 * (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn constant_patch_has_no_keypoints() {
        assert!(extract_descriptors(&Patch::filled(64, 64, 0.5_f64).unwrap()).is_empty());
    }

    #[test]
    fn single_blob_is_found_at_its_center() {
        let p = blobs(64, 64, &[(32.0, 32.0)], 3.0);
        let d = extract_descriptors(&p);
        assert!(!d.is_empty());
        assert!(d.iter().any(|k| (k.x - 32.0).hypot(k.y - 32.0) <= 2.0));
    }

    #[test]
    fn descriptors_are_unit_or_zero() {
        let p = blobs(96, 96, &[(20.0, 30.0), (50.0, 60.0), (70.0, 25.0)], 2.5);
        for d in extract_descriptors(&p) {
            assert_eq!(d.vector.len(), DESCRIPTOR_LEN);
            let n = d.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mirror_indexing() {
        assert_eq!(mirror(-1, 5), 1);
        assert_eq!(mirror(5, 5), 3);
        assert_eq!(mirror(9, 5), 1);
        assert_eq!(mirror(3, 1), 0);
    }
}

//! Periodicity count: gradient, 2-D FFT, ideal low-pass, inverse FFT, peak count.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::SourceError;
use crate::imaging::{gradient_magnitude, moment_stats, MomentStats, Patch};
use crate::scalar::Real;

pub const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierParams {
    /// Radial pass-band edge as a fraction of the highest (diagonal) frequency.
    pub cutoff: f64,
    /// Peaks must exceed `mean + peak_sigma * std` of the reconstruction.
    pub peak_sigma: f64,
}

impl Default for FourierParams {
    fn default() -> Self {
        Self { cutoff: 0.25, peak_sigma: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierOutput<T = f64> {
    pub maxima_count: T,
    /// Moments of the low-passed reconstruction.
    pub recon_stats: MomentStats<T>,
    /// Moments of `|gradient - reconstruction|`.
    pub residual_stats: MomentStats<T>,
    /// `(row, col)` of each counted peak.
    pub peaks: Vec<(usize, usize)>,
}

fn transform_rows<T: Real>(data: &mut [Complex<T>], height: usize, width: usize, inverse: bool, planner: &mut FftPlanner<T>) {
    let fft = if inverse { planner.plan_fft_inverse(width) } else { planner.plan_fft_forward(width) };
    for row in data.chunks_exact_mut(width).take(height) {
        fft.process(row);
    }
}

fn transpose<T: Copy>(data: &[T], height: usize, width: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for c in 0..width {
        for r in 0..height {
            out.push(data[r * width + c]);
        }
    }
    out
}

fn transform_2d<T: Real>(data: &mut Vec<Complex<T>>, height: usize, width: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    transform_rows(data, height, width, inverse, &mut planner);
    let mut t = transpose(data, height, width);
    transform_rows(&mut t, width, height, inverse, &mut planner);
    *data = transpose(&t, width, height);
}

/// Unnormalized forward 2-D DFT of a row-major `height x width` array.
pub fn fft2<T: Real>(data: &mut Vec<Complex<T>>, height: usize, width: usize) {
    transform_2d(data, height, width, false);
}

/// Inverse of [`fft2`], including the `1 / (height * width)` factor.
pub fn ifft2<T: Real>(data: &mut Vec<Complex<T>>, height: usize, width: usize) {
    transform_2d(data, height, width, true);
    let norm = T::one() / T::from_usize_lossy(height * width);
    for v in data.iter_mut() {
        *v = *v * norm;
    }
}

/// Normalized radial frequency of DFT bin `(ky, kx)`: 0 at DC, 1 at the corner
/// of the centered spectrum.
fn radial_frequency<T: Real>(ky: usize, kx: usize, height: usize, width: usize) -> T {
    let signed = |k: usize, n: usize| -> T {
        let f = if k <= n / 2 { T::from_usize_lossy(k) } else { -T::from_usize_lossy(n - k) };
        f / (T::from_usize_lossy(n) * T::lit(0.5))
    };
    let (u, v) = (signed(ky, height), signed(kx, width));
    ((u * u + v * v) * T::lit(0.5)).sqrt()
}

/// Ideal circular low-pass of a real array; returns the real part of the inverse.
pub fn low_pass<T: Real>(values: &[T], height: usize, width: usize, cutoff: T) -> Vec<T> {
    let mut spec: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft2(&mut spec, height, width);
    for ky in 0..height {
        for kx in 0..width {
            if radial_frequency::<T>(ky, kx, height, width) > cutoff {
                spec[ky * width + kx] = Complex::new(T::zero(), T::zero());
            }
        }
    }
    ifft2(&mut spec, height, width);
    spec.into_iter().map(|c| c.re).collect()
}

/// Peaks of a wrap-around array above `threshold`.
///
/// A peak is a connected (8-neighborhood) set of equal values whose every outside
/// neighbor is strictly lower (and at least one exists); each is reported once at its
/// first pixel in scan order.
pub fn local_maxima<T: Real>(values: &[T], height: usize, width: usize, threshold: T) -> Vec<(usize, usize)> {
    let idx = |r: isize, c: isize| -> usize {
        (r.rem_euclid(height as isize) as usize) * width + c.rem_euclid(width as isize) as usize
    };
    let mut visited = vec![false; values.len()];
    let mut peaks = Vec::new();
    let mut stack = Vec::new();
    let mut region = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let start = r * width + c;
            let v = values[start];
            if visited[start] || v <= threshold {
                continue;
            }
            // Reject early when some neighbor is higher; plateaus are resolved below.
            let mut higher = false;
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    if (dr, dc) != (0, 0) && values[idx(r as isize + dr, c as isize + dc)] > v {
                        higher = true;
                    }
                }
            }
            if higher {
                continue;
            }
            region.clear();
            stack.push(start);
            visited[start] = true;
            let mut strict = true;
            let mut has_lower = false;
            while let Some(p) = stack.pop() {
                region.push(p);
                let (pr, pc) = ((p / width) as isize, (p % width) as isize);
                for dr in -1..=1isize {
                    for dc in -1..=1isize {
                        if (dr, dc) == (0, 0) {
                            continue;
                        }
                        let q = idx(pr + dr, pc + dc);
                        if values[q] == v {
                            if !visited[q] {
                                visited[q] = true;
                                stack.push(q);
                            }
                        } else if values[q] > v {
                            strict = false;
                        } else {
                            has_lower = true;
                        }
                    }
                }
            }
            if strict && has_lower {
                peaks.push((r, c));
            }
        }
    }
    peaks
}

/// Counts periodic structure in a patch from the low-passed spectrum of its gradient.
pub fn fourier_analyze<T: Real>(p: &Patch<T>, params: &FourierParams) -> Result<FourierOutput<T>, SourceError> {
    if !(params.cutoff > 0.0 && params.cutoff <= 1.0) {
        return Err(SourceError::InvalidParameter(format!("fourier cutoff {} outside (0, 1]", params.cutoff)));
    }
    if !(params.peak_sigma.is_finite()) {
        return Err(SourceError::InvalidParameter("fourier peak_sigma must be finite".into()));
    }
    p.require_min(MIN_SIDE, MIN_SIDE)?;
    let (h, w) = (p.height(), p.width());
    let grad = gradient_magnitude(p)?;
    let recon = low_pass(grad.data(), h, w, T::lit(params.cutoff));
    let residual: Vec<T> = grad.data().iter().zip(&recon).map(|(&g, &r)| (g - r).abs()).collect();
    let recon_stats = moment_stats(&recon);
    let residual_stats = moment_stats(&residual);

    let peaks = if grad.data().iter().all(|&g| g == T::zero()) {
        Vec::new()
    } else {
        let threshold = recon_stats.mean + T::lit(params.peak_sigma) * recon_stats.variance.sqrt();
        local_maxima(&recon, h, w, threshold)
    };
    Ok(FourierOutput { maxima_count: T::from_usize_lossy(peaks.len()), recon_stats, residual_stats, peaks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn blob_lattice(sigma: f64) -> Patch<f64> {
        Patch::from_fn(64, 64, |r, c| {
            let mut v = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    let (cy, cx) = (8.0 + 16.0 * i as f64, 8.0 + 16.0 * j as f64);
                    let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                    v += (-d2 / (2.0 * sigma * sigma)).exp();
                }
            }
            v
        })
        .unwrap()
    }

    fn params(cutoff: f64) -> FourierParams {
        FourierParams { cutoff, ..FourierParams::default() }
    }

    #[test]
    fn constant_patch_has_no_peaks() {
        let out = fourier_analyze(&Patch::filled(32, 32, 0.4_f64).unwrap(), &params(0.25)).unwrap();
        assert_eq!(out.maxima_count, 0.0);
        assert_eq!(out.recon_stats, MomentStats::default());
    }

    #[test]
    fn blob_lattice_has_sixteen_peaks() {
        let out = fourier_analyze(&blob_lattice(2.0), &params(0.25)).unwrap();
        assert_eq!(out.maxima_count, 16.0);
        // Each peak sits at a blob center.
        for &(r, c) in &out.peaks {
            assert_eq!((r % 16, c % 16), (8, 8));
        }
    }

    #[test]
    fn unit_cutoff_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (h, w) in [(16, 16), (23, 31), (40, 17)] {
            let vals: Vec<f64> = (0..h * w).map(|_| rng.gen()).collect();
            let back = low_pass(&vals, h, w, 1.0);
            assert!(vals.iter().zip(&back).all(|(a, b)| (a - b).abs() <= 1e-9));
        }
    }

    #[test]
    fn plateau_counts_once() {
        let mut v = vec![0.0_f64; 64];
        v[2 * 8 + 3] = 1.0;
        v[2 * 8 + 4] = 1.0;
        v[6 * 8 + 6] = 0.5;
        v[6 * 8 + 7] = 0.7;
        assert_eq!(local_maxima(&v, 8, 8, 0.1), vec![(2, 3), (6, 7)]);
        assert!(local_maxima(&vec![1.0; 64], 8, 8, 0.0).is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = Patch::filled(32, 32, 0.0_f64).unwrap();
        assert!(matches!(fourier_analyze(&p, &params(0.0)), Err(SourceError::InvalidParameter(_))));
        assert!(matches!(fourier_analyze(&p, &params(1.5)), Err(SourceError::InvalidParameter(_))));
        let small = Patch::filled(8, 32, 0.0_f64).unwrap();
        assert!(matches!(fourier_analyze(&small, &params(0.5)), Err(SourceError::Image(_))));
    }
}

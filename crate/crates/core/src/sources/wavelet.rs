//! Three-level Haar pyramid: ten sub-image energies plus their moments.

use super::SourceError;
use crate::imaging::{moment_stats, Patch};
use crate::learn::CountRegressor;
use crate::scalar::Real;

pub const LEVELS: usize = 3;
pub const SUBBANDS: usize = 1 + 3 * LEVELS;
pub const MIN_SIDE: usize = 16;
pub const LAYOUT: &str = "wavelet-haar-v1/[LL3,LH3,HL3,HH3,LH2,HL2,HH2,LH1,HL1,HH1]";

/// Sub-image names in feature order.
pub const SUBBAND_NAMES: [&str; SUBBANDS] = ["LL3", "LH3", "HL3", "HH3", "LH2", "HL2", "HH2", "LH1", "HL1", "HH1"];

/// One decomposition level. `lh` is low-pass along rows and high-pass down columns,
/// `hl` the reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarLevel<T = f64> {
    pub height: usize,
    pub width: usize,
    pub ll: Vec<T>,
    pub lh: Vec<T>,
    pub hl: Vec<T>,
    pub hh: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFeatures<T = f64> {
    /// Mean absolute coefficient per sub-image, in [`SUBBAND_NAMES`] order.
    pub energies: [T; SUBBANDS],
    /// Variance, skewness and kurtosis per sub-image, same order.
    pub subband_stats: [T; 3 * SUBBANDS],
}

/// Appends the last sample when the length is odd (half-sample symmetric extension).
fn extend_even<T: Copy>(v: &[T], height: usize, width: usize) -> (Vec<T>, usize, usize) {
    let (eh, ew) = (height + height % 2, width + width % 2);
    if (eh, ew) == (height, width) {
        return (v.to_vec(), height, width);
    }
    let mut out = Vec::with_capacity(eh * ew);
    for r in 0..eh {
        let sr = r.min(height - 1);
        for c in 0..ew {
            out.push(v[sr * width + c.min(width - 1)]);
        }
    }
    (out, eh, ew)
}

/// One orthonormal 2-D Haar analysis step.
pub fn haar_step<T: Real>(values: &[T], height: usize, width: usize) -> HaarLevel<T> {
    let (v, h, w) = extend_even(values, height, width);
    let (oh, ow) = (h / 2, w / 2);
    let s = T::FRAC_1_SQRT_2();
    let mut rows_lo = vec![T::zero(); h * ow];
    let mut rows_hi = vec![T::zero(); h * ow];
    for r in 0..h {
        for c in 0..ow {
            let (a, b) = (v[r * w + 2 * c], v[r * w + 2 * c + 1]);
            rows_lo[r * ow + c] = (a + b) * s;
            rows_hi[r * ow + c] = (a - b) * s;
        }
    }
    let columns = |src: &[T]| -> (Vec<T>, Vec<T>) {
        let mut lo = vec![T::zero(); oh * ow];
        let mut hi = vec![T::zero(); oh * ow];
        for r in 0..oh {
            for c in 0..ow {
                let (a, b) = (src[2 * r * ow + c], src[(2 * r + 1) * ow + c]);
                lo[r * ow + c] = (a + b) * s;
                hi[r * ow + c] = (a - b) * s;
            }
        }
        (lo, hi)
    };
    let (ll, lh) = columns(&rows_lo);
    let (hl, hh) = columns(&rows_hi);
    HaarLevel { height: oh, width: ow, ll, lh, hl, hh }
}

/// Pyramid decomposition recursing on the approximation; returns levels finest first.
pub fn haar_pyramid<T: Real>(p: &Patch<T>, levels: usize) -> Vec<HaarLevel<T>> {
    let mut out: Vec<HaarLevel<T>> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let next = match out.last() {
            None => haar_step(p.data(), p.height(), p.width()),
            Some(prev) => haar_step(&prev.ll, prev.height, prev.width),
        };
        out.push(next);
    }
    out
}

fn mean_abs<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).sum::<T>() / T::from_usize_lossy(v.len())
}

pub fn wavelet_features<T: Real>(p: &Patch<T>) -> Result<WaveletFeatures<T>, SourceError> {
    p.require_min(MIN_SIDE, MIN_SIDE)?;
    let pyr = haar_pyramid(p, LEVELS);
    let coarsest = &pyr[LEVELS - 1];
    let mut bands: Vec<&[T]> = vec![&coarsest.ll];
    for level in pyr.iter().rev() {
        bands.extend([level.lh.as_slice(), level.hl.as_slice(), level.hh.as_slice()]);
    }
    let mut energies = [T::zero(); SUBBANDS];
    let mut subband_stats = [T::zero(); 3 * SUBBANDS];
    for (k, band) in bands.iter().enumerate() {
        energies[k] = mean_abs(band);
        let s = moment_stats(band);
        subband_stats[3 * k] = s.variance;
        subband_stats[3 * k + 1] = s.skewness;
        subband_stats[3 * k + 2] = s.kurtosis;
    }
    Ok(WaveletFeatures { energies, subband_stats })
}

/// Count from the trained wavelet regressor, clamped at zero.
pub fn wavelet_count<T: Real>(f: &WaveletFeatures<T>, model: &CountRegressor<T>) -> Result<T, SourceError> {
    if model.layout != LAYOUT {
        return Err(SourceError::Incompatible { expected: model.layout.clone(), found: LAYOUT.into() });
    }
    Ok(model.predict_count(&f.energies)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_patch_concentrates_in_ll3() {
        let f = wavelet_features(&Patch::filled(32, 32, 0.3_f64).unwrap()).unwrap();
        assert!((f.energies[0] - 2.4).abs() < 1e-14);
        assert!(f.energies[1..].iter().all(|&e| e.abs() < 1e-15));
    }

    #[test]
    fn odd_sides_are_extended() {
        let f = wavelet_features(&Patch::filled(17, 21, 1.0_f64).unwrap()).unwrap();
        assert!((f.energies[0] - 8.0).abs() < 1e-13);
        let level = haar_step(&[1.0_f64, 2.0, 3.0], 1, 3);
        assert_eq!((level.height, level.width), (1, 2));
    }

    #[test]
    fn small_patch_is_rejected() {
        assert!(wavelet_features(&Patch::filled(15, 40, 0.0_f64).unwrap()).is_err());
    }
}

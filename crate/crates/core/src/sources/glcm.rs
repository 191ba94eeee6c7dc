//! Gray-level co-occurrence features at distance 1 for 0°, 45°, 90° and 135°.

use super::SourceError;
use crate::imaging::{moment_stats, Patch};
use crate::learn::CountRegressor;
use crate::scalar::Real;

/// Angles in feature order.
pub const ANGLES_DEG: [u32; 4] = [0, 45, 90, 135];

/// `(d_row, d_col)` of the partner pixel for each angle; rows grow downward.
pub const OFFSETS: [(isize, isize); 4] = [(0, 1), (-1, 1), (-1, 0), (-1, -1)];

pub const FEATURE_DIM: usize = 16;
pub const STATS_DIM: usize = 12;

pub fn layout_tag(levels: usize) -> String {
    format!("glcm-v1/levels={levels}")
}

/// Integer gray levels in `0..levels`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedGrid {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub data: Vec<usize>,
}

impl QuantizedGrid {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.data[row * self.width + col]
    }

    /// Quarter turn counter-clockwise: the rightward neighbor becomes the upward one.
    pub fn rotate_ccw(&self) -> QuantizedGrid {
        let (h, w) = (self.height, self.width);
        let mut data = vec![0; h * w];
        for r in 0..h {
            for c in 0..w {
                // Column c (from the left) becomes row w - 1 - c (from the top).
                data[(w - 1 - c) * h + r] = self.get(r, c);
            }
        }
        QuantizedGrid { width: h, height: w, levels: self.levels, data }
    }
}

/// Uniform bins over `[0, 1]`; values are clamped and 1.0 lands in the top bin.
pub fn quantize<T: Real>(p: &Patch<T>, levels: usize) -> Result<QuantizedGrid, SourceError> {
    if levels < 2 {
        return Err(SourceError::InvalidParameter(format!("GLCM needs at least 2 levels, got {levels}")));
    }
    let lv = T::from_usize_lossy(levels);
    let data = p
        .data()
        .iter()
        .map(|&v| {
            let v = v.max(T::zero()).min(T::one());
            (v * lv).floor().to_usize().unwrap_or(0).min(levels - 1)
        })
        .collect();
    Ok(QuantizedGrid { width: p.width(), height: p.height(), levels, data })
}

/// The four texture measures of one co-occurrence matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AngleFeatures<T = f64> {
    pub dissimilarity: T,
    pub homogeneity: T,
    pub energy: T,
    pub entropy: T,
    /// No pixel pair exists at this offset; all measures are zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlcmFeatures<T = f64> {
    pub levels: usize,
    pub angles: [AngleFeatures<T>; 4],
    /// Variance, skewness and kurtosis of each matrix's entries, angle-major.
    pub matrix_stats: [T; STATS_DIM],
}

impl<T: Real> GlcmFeatures<T> {
    /// `(θ ascending) x (D, H, E, P)`.
    pub fn to_vec(&self) -> Vec<T> {
        self.angles
            .iter()
            .flat_map(|a| [a.dissimilarity, a.homogeneity, a.energy, a.entropy])
            .collect()
    }

    pub fn layout(&self) -> String {
        layout_tag(self.levels)
    }
}

/// Normalized, unsymmetrized co-occurrence matrix (`levels x levels`, row-major)
/// for one offset; `None` when no pair fits in the grid.
pub fn cooccurrence<T: Real>(q: &QuantizedGrid, offset: (isize, isize)) -> Option<Vec<T>> {
    let l = q.levels;
    let mut counts = vec![0usize; l * l];
    let (dr, dc) = offset;
    let (h, w) = (q.height as isize, q.width as isize);
    let (r0, r1) = ((-dr).max(0), h - dr.max(0));
    let (c0, c1) = ((-dc).max(0), w - dc.max(0));
    let mut total = 0usize;
    for r in r0..r1 {
        for c in c0..c1 {
            let i = q.get(r as usize, c as usize);
            let j = q.get((r + dr) as usize, (c + dc) as usize);
            counts[i * l + j] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    let t = T::from_usize_lossy(total);
    Some(counts.into_iter().map(|n| T::from_usize_lossy(n) / t).collect())
}

fn angle_features<T: Real>(f: &[T], levels: usize) -> AngleFeatures<T> {
    let mut a = AngleFeatures::default();
    for i in 0..levels {
        for j in 0..levels {
            let p = f[i * levels + j];
            if p == T::zero() {
                continue;
            }
            let d = T::from_usize_lossy(i.abs_diff(j));
            a.dissimilarity = a.dissimilarity + p * d;
            a.homogeneity = a.homogeneity + p / (T::one() + d * d);
            a.energy = a.energy + p * p;
            a.entropy = a.entropy - p * p.ln();
        }
    }
    a
}

pub fn glcm_features<T: Real>(q: &QuantizedGrid) -> Result<GlcmFeatures<T>, SourceError> {
    if q.width < 2 || q.height < 2 {
        return Err(SourceError::InvalidParameter(format!("GLCM grid {}x{} is below 2x2", q.width, q.height)));
    }
    let mut angles = [AngleFeatures::default(); 4];
    let mut matrix_stats = [T::zero(); STATS_DIM];
    for (k, &offset) in OFFSETS.iter().enumerate() {
        match cooccurrence::<T>(q, offset) {
            Some(m) => {
                angles[k] = angle_features(&m, q.levels);
                let s = moment_stats(&m);
                matrix_stats[3 * k] = s.variance;
                matrix_stats[3 * k + 1] = s.skewness;
                matrix_stats[3 * k + 2] = s.kurtosis;
            }
            None => angles[k].degenerate = true,
        }
    }
    Ok(GlcmFeatures { levels: q.levels, angles, matrix_stats })
}

/// Count from the trained GLCM regressor, clamped at zero.
pub fn glcm_count<T: Real>(f: &GlcmFeatures<T>, model: &CountRegressor<T>) -> Result<T, SourceError> {
    let layout = f.layout();
    if model.layout != layout {
        return Err(SourceError::Incompatible { expected: model.layout.clone(), found: layout });
    }
    Ok(model.predict_count(&f.to_vec())?)
}

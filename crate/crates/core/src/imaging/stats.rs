use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Bin count of the histogram behind [`MomentStats::entropy`].
pub const ENTROPY_BINS: usize = 256;

/// Summary moments of a value collection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentStats<T = f64> {
    /// Shannon entropy (nats) of the 256-bin histogram of min-max normalized values.
    pub entropy: T,
    pub mean: T,
    /// Population variance.
    pub variance: T,
    pub skewness: T,
    /// Excess kurtosis.
    pub kurtosis: T,
}

impl<T: Real> MomentStats<T> {
    /// `[entropy, mean, variance, skewness, kurtosis]`.
    pub fn to_array(&self) -> [T; 5] {
        [self.entropy, self.mean, self.variance, self.skewness, self.kurtosis]
    }
}

/// Entropy, mean, population variance, skewness and excess kurtosis.
///
/// A collection with no spread (including an empty one) reports zero for every
/// moment except the mean.
pub fn moment_stats<T: Real>(values: &[T]) -> MomentStats<T> {
    if values.is_empty() {
        return MomentStats::default();
    }
    let n = T::from_usize_lossy(values.len());
    let (lo, hi) = values
        .iter()
        .fold((values[0], values[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = values.iter().copied().sum::<T>() / n;
    if lo == hi {
        return MomentStats { entropy: T::zero(), mean: lo, variance: T::zero(), skewness: T::zero(), kurtosis: T::zero() };
    }

    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    m2 = m2 / n;
    m3 = m3 / n;
    m4 = m4 / n;
    let (skewness, kurtosis) = if m2 > T::zero() {
        (m3 / m2.powf(T::lit(1.5)), m4 / (m2 * m2) - T::lit(3.0))
    } else {
        (T::zero(), T::zero())
    };

    let mut hist = [0usize; ENTROPY_BINS];
    let span = hi - lo;
    let bins = T::from_usize_lossy(ENTROPY_BINS);
    for &v in values {
        let idx = ((v - lo) / span * bins).floor().to_usize().unwrap_or(0).min(ENTROPY_BINS - 1);
        hist[idx] += 1;
    }
    let entropy = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = T::from_usize_lossy(c) / n;
            -p * p.ln()
        })
        .sum::<T>();

    MomentStats { entropy: entropy.max(T::zero()), mean, variance: m2, skewness, kurtosis }
}

//! Interest-point source: bag-of-words count and Poisson crowd confidence.

mod descriptor;

pub use descriptor::{extract_descriptors, Descriptor, DESCRIPTOR_LEN, DESCRIPTOR_VERSION};

use serde::{Deserialize, Serialize};

use super::SourceError;
use crate::learn::{kmeans, nearest_centroid, CountRegressor, LearnError};
use crate::scalar::Real;

/// Lower bound on every Poisson rate, so unseen words keep a finite log-rate.
pub const RATE_FLOOR: f64 = 0.01;

pub fn layout_tag(k: usize) -> String {
    format!("interest-bow-v1/{DESCRIPTOR_VERSION}/K={k}")
}

/// Visual-word centroids in descriptor space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook<T = f64> {
    pub version: String,
    pub centroids: Vec<Vec<T>>,
}

impl<T: Real> Codebook<T> {
    pub fn size(&self) -> usize {
        self.centroids.len()
    }
}

/// Clusters descriptor vectors into `k` words.
pub fn build_codebook<T: Real>(
    descs: &[Descriptor<T>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Codebook<T>, SourceError> {
    if descs.len() < k {
        return Err(SourceError::InsufficientData(format!(
            "codebook of size {k} needs at least {k} descriptors, found {}",
            descs.len()
        )));
    }
    let points: Vec<Vec<T>> = descs.iter().map(|d| d.vector.clone()).collect();
    let model = kmeans(&points, k, seed, max_iter)?;
    Ok(Codebook { version: DESCRIPTOR_VERSION.to_string(), centroids: model.centroids })
}

/// Occurrences `k_i` of each visual word in a cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordHistogram {
    pub counts: Vec<usize>,
}

impl WordHistogram {
    pub fn zeros(k: usize) -> Self {
        Self { counts: vec![0; k] }
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_real<T: Real>(&self) -> Vec<T> {
        self.counts.iter().map(|&c| T::from_usize_lossy(c)).collect()
    }
}

/// Hard assignment of each descriptor to its nearest word (lowest index on ties).
pub fn word_histogram<T: Real>(descs: &[Descriptor<T>], codebook: &Codebook<T>) -> Result<WordHistogram, SourceError> {
    if codebook.centroids.is_empty() {
        return Err(SourceError::InvalidParameter("empty codebook".into()));
    }
    let mut h = WordHistogram::zeros(codebook.size());
    for d in descs {
        let dim = codebook.centroids[0].len();
        if d.vector.len() != dim {
            return Err(LearnError::DimensionMismatch { expected: dim, found: d.vector.len() }.into());
        }
        h.counts[nearest_centroid(&d.vector, &codebook.centroids).0] += 1;
    }
    Ok(h)
}

/// Per-word Poisson rates for crowd (`plus`) and non-crowd (`minus`) cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRates<T = f64> {
    pub lambda_plus: Vec<T>,
    pub lambda_minus: Vec<T>,
}

impl<T: Real> PoissonRates<T> {
    pub fn new(lambda_plus: Vec<T>, lambda_minus: Vec<T>) -> Result<Self, SourceError> {
        let rates = Self { lambda_plus, lambda_minus };
        rates.validate()?;
        Ok(rates)
    }

    pub fn size(&self) -> usize {
        self.lambda_plus.len()
    }

    fn validate(&self) -> Result<(), SourceError> {
        if self.lambda_plus.len() != self.lambda_minus.len() {
            return Err(LearnError::DimensionMismatch {
                expected: self.lambda_plus.len(),
                found: self.lambda_minus.len(),
            }
            .into());
        }
        let bad = self
            .lambda_plus
            .iter()
            .chain(&self.lambda_minus)
            .any(|&l| !(l > T::zero()) || !l.is_finite());
        if bad {
            return Err(SourceError::InvalidParameter("Poisson rates must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Log-likelihood ratio of crowd against non-crowd for independent Poisson word counts:
/// `Σ_i [λ⁻_i − λ⁺_i + k_i (ln λ⁺_i − ln λ⁻_i)]`.
pub fn crowd_confidence<T: Real>(h: &WordHistogram, rates: &PoissonRates<T>) -> Result<T, SourceError> {
    rates.validate()?;
    if h.size() != rates.size() {
        return Err(LearnError::DimensionMismatch { expected: rates.size(), found: h.size() }.into());
    }
    Ok(h.counts
        .iter()
        .zip(rates.lambda_plus.iter().zip(&rates.lambda_minus))
        .map(|(&k, (&lp, &lm))| lm - lp + T::from_usize_lossy(k) * (lp.ln() - lm.ln()))
        .sum())
}

/// Maximum-likelihood rates (class means of `k_i`) floored at `rate_floor`.
pub fn estimate_rates<T: Real>(
    histograms: &[WordHistogram],
    is_crowd: &[bool],
    rate_floor: T,
) -> Result<PoissonRates<T>, SourceError> {
    if histograms.len() != is_crowd.len() {
        return Err(LearnError::LengthMismatch { rows: histograms.len(), targets: is_crowd.len() }.into());
    }
    if !(rate_floor > T::zero()) {
        return Err(SourceError::InvalidParameter("rate floor must be positive".into()));
    }
    let k = histograms.first().map_or(0, WordHistogram::size);
    let class_mean = |crowd: bool| -> Result<Vec<T>, SourceError> {
        let members: Vec<&WordHistogram> =
            histograms.iter().zip(is_crowd).filter(|&(_, &c)| c == crowd).map(|(h, _)| h).collect();
        if members.is_empty() {
            let class = if crowd { "crowd" } else { "non-crowd" };
            return Err(SourceError::InsufficientData(format!("no {class} cells to estimate Poisson rates")));
        }
        let mut sums = vec![0usize; k];
        for h in &members {
            if h.size() != k {
                return Err(LearnError::DimensionMismatch { expected: k, found: h.size() }.into());
            }
            for (s, &c) in sums.iter_mut().zip(&h.counts) {
                *s += c;
            }
        }
        let n = T::from_usize_lossy(members.len());
        Ok(sums.into_iter().map(|s| (T::from_usize_lossy(s) / n).max(rate_floor)).collect())
    };
    PoissonRates::new(class_mean(true)?, class_mean(false)?)
}

/// Count from the bag-of-words regressor, clamped at zero.
pub fn interest_count<T: Real>(h: &WordHistogram, model: &CountRegressor<T>) -> Result<T, SourceError> {
    let layout = layout_tag(h.size());
    if model.layout != layout {
        return Err(SourceError::Incompatible { expected: model.layout.clone(), found: layout });
    }
    Ok(model.predict_count(&h.to_real::<T>())?)
}

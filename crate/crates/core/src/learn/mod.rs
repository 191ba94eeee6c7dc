//! Learning primitives: ε-support-vector regression, k-means and z-scoring.

mod kmeans;
mod regressor;
mod standardize;
mod svr;

pub use kmeans::{kmeans, nearest_centroid, KMeansModel};
pub use regressor::CountRegressor;
pub use standardize::Standardizer;
pub use svr::{svr_fit, Kernel, SvrModel, SvrParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn check_rows<T: crate::Real>(rows: &[Vec<T>]) -> Result<usize, LearnError> {
    let dim = rows.first().map_or(0, Vec::len);
    for (row, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(LearnError::DimensionMismatch { expected: dim, found: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite { row });
        }
    }
    Ok(dim)
}

#[inline]
pub(crate) fn squared_distance<T: crate::Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

#[inline]
pub(crate) fn dot<T: crate::Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

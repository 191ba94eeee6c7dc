use serde::{Deserialize, Serialize};

use super::{check_rows, LearnError};
use crate::scalar::Real;

/// Per-dimension z-scoring. Dimensions without spread keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T = f64> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(rows: &[Vec<T>]) -> Result<Self, LearnError> {
        if rows.is_empty() {
            return Err(LearnError::TooFewSamples { needed: 1, found: 0 });
        }
        let dim = check_rows(rows)?;
        let n = T::from_usize_lossy(rows.len());
        let mut mean = vec![T::zero(); dim];
        for r in rows {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); dim];
        for r in rows {
            for ((s, &v), &m) in var.iter_mut().zip(r).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > T::lit(1e-12) {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn fit_scalar(values: &[T]) -> Result<Self, LearnError> {
        let rows: Vec<Vec<T>> = values.iter().map(|&v| vec![v]).collect();
        Self::fit(&rows)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>, LearnError> {
        self.check(x)?;
        Ok(x.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| (v - m) / s).collect())
    }

    pub fn inverse(&self, z: &[T]) -> Result<Vec<T>, LearnError> {
        self.check(z)?;
        Ok(z.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| v * s + m).collect())
    }

    fn check(&self, x: &[T]) -> Result<(), LearnError> {
        if x.len() != self.dim() {
            return Err(LearnError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }
}

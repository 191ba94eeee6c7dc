use serde::{Deserialize, Serialize};

use super::{svr_fit, LearnError, Standardizer, SvrModel, SvrParams};
use crate::scalar::Real;

/// ε-SVR over z-scored inputs with a z-scored target, tagged with the feature
/// layout it was trained on. `params.epsilon` is given in target units and is
/// rescaled into the standardized target space before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRegressor<T = f64> {
    pub layout: String,
    pub input: Standardizer<T>,
    pub target: Standardizer<T>,
    pub svr: SvrModel<T>,
}

impl<T: Real> CountRegressor<T> {
    pub fn fit(
        layout: impl Into<String>,
        rows: &[Vec<T>],
        targets: &[T],
        params: &SvrParams<T>,
        seed: u64,
    ) -> Result<Self, LearnError> {
        if rows.len() != targets.len() {
            return Err(LearnError::LengthMismatch { rows: rows.len(), targets: targets.len() });
        }
        let input = Standardizer::fit(rows)?;
        let target = Standardizer::fit_scalar(targets)?;
        let z_rows = rows.iter().map(|r| input.apply(r)).collect::<Result<Vec<_>, _>>()?;
        let z_targets: Vec<T> = targets.iter().map(|&t| (t - target.mean[0]) / target.scale[0]).collect();
        let mut scaled = *params;
        scaled.epsilon = params.epsilon / target.scale[0];
        let svr = svr_fit(&z_rows, &z_targets, &scaled, seed)?;
        Ok(Self { layout: layout.into(), input, target, svr })
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    /// Unclamped prediction in target units.
    pub fn predict(&self, x: &[T]) -> Result<T, LearnError> {
        let z = self.svr.predict(&self.input.apply(x)?)?;
        Ok(z * self.target.scale[0] + self.target.mean[0])
    }

    /// Prediction clamped at zero.
    pub fn predict_count(&self, x: &[T]) -> Result<T, LearnError> {
        Ok(self.predict(x)?.max(T::zero()))
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::features::{row_dim, SourceModels, ROW_LAYOUT_VERSION};
use crate::config::Config;
use crate::learn::CountRegressor;
use crate::sources::head::HeadFilter;
use crate::sources::interest::{Codebook, PoissonRates, DESCRIPTOR_VERSION};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model format version {found} is not supported (expected {expected})")]
    FormatVersion { expected: u32, found: u32 },
    #[error("model {what} '{found}' does not match this build ('{expected}')")]
    Layout { what: &'static str, expected: String, found: String },
    #[error("model was trained with config {model}, inference config is {requested}")]
    ConfigMismatch { model: String, requested: String },
    #[error("model is internally inconsistent: {0}")]
    Inconsistent(String),
    #[error("model parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDiagnostics {
    pub images: usize,
    pub cells: usize,
    pub descriptors: usize,
    pub head_positives: usize,
    pub head_negatives: usize,
    /// Every SVR reached its KKT tolerance.
    pub converged: bool,
}

/// Everything inference needs, serialized as versioned JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedModel {
    pub format_version: u32,
    pub row_layout: String,
    pub descriptor_version: String,
    pub config: Config,
    pub config_hash: String,
    pub codebook: Codebook<f64>,
    pub rates: PoissonRates<f64>,
    pub interest: CountRegressor<f64>,
    pub glcm: CountRegressor<f64>,
    pub wavelet: CountRegressor<f64>,
    pub head: HeadFilter<f64>,
    pub fusion: CountRegressor<f64>,
    pub diagnostics: TrainingDiagnostics,
}

impl TrainedModel {
    pub fn sources(&self) -> SourceModels<'_> {
        SourceModels {
            config: &self.config,
            codebook: &self.codebook,
            rates: &self.rates,
            interest: &self.interest,
            glcm: &self.glcm,
            wavelet: &self.wavelet,
            head: &self.head,
        }
    }

    /// Structural checks, run on every load.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::FormatVersion { expected: MODEL_FORMAT_VERSION, found: self.format_version });
        }
        if self.row_layout != ROW_LAYOUT_VERSION {
            return Err(ModelError::Layout {
                what: "row layout",
                expected: ROW_LAYOUT_VERSION.into(),
                found: self.row_layout.clone(),
            });
        }
        if self.descriptor_version != DESCRIPTOR_VERSION || self.codebook.version != DESCRIPTOR_VERSION {
            return Err(ModelError::Layout {
                what: "descriptor version",
                expected: DESCRIPTOR_VERSION.into(),
                found: self.descriptor_version.clone(),
            });
        }
        self.config.validate().map_err(|e| ModelError::Inconsistent(e.to_string()))?;
        if self.config.fingerprint() != self.config_hash {
            return Err(ModelError::Inconsistent("config hash does not match the stored config".into()));
        }
        let k = self.codebook.size();
        let checks = [
            ("codebook", k == self.config.codebook.k),
            ("rates", self.rates.size() == k),
            ("interest regressor", self.interest.dim() == k),
            ("glcm regressor", self.glcm.dim() == crate::sources::glcm::FEATURE_DIM),
            ("wavelet regressor", self.wavelet.dim() == crate::sources::wavelet::SUBBANDS),
            ("head filter", self.head.weights.len() == crate::sources::head::FEATURE_DIM),
            ("fusion regressor", self.fusion.dim() == row_dim()),
        ];
        if let Some((what, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(ModelError::Inconsistent(format!("{what} has the wrong dimension")));
        }
        Ok(())
    }

    /// Refuses to run under a config whose fingerprint differs from training.
    pub fn check_compatible(&self, config: &Config) -> Result<(), ModelError> {
        let requested = config.fingerprint();
        if requested != self.config_hash {
            return Err(ModelError::ConfigMismatch { model: self.config_hash.clone(), requested });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("model serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ModelError> {
        let model: TrainedModel = serde_json::from_slice(bytes).map_err(|e| ModelError::Parse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    /// SHA-256 of the serialized model.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_json()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load(path: &Path) -> Result<Self, super::PipelineError> {
        let bytes = std::fs::read(path).map_err(|source| super::PipelineError::Io { path: path.to_owned(), source })?;
        Ok(Self::from_json(&bytes)?)
    }
}

//! Pipeline configuration: JSON file plus command-line overrides.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::imaging::{GridSpec, MIN_CELL_SIZE};
use crate::learn::{Kernel, SvrParams};
use crate::sources::fourier::FourierParams;
use crate::sources::head::HeadParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config value out of range: {0}")]
    Range(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvrConfig {
    pub kernel: KernelKind,
    /// RBF width; `None` means `1 / input dimension`.
    pub gamma: Option<f64>,
    pub c: f64,
    /// Tube half-width in count units.
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self { kernel: KernelKind::Rbf, gamma: None, c: 10.0, epsilon: 0.5, tol: 1e-3, max_iter: 10_000_000 }
    }
}

impl SvrConfig {
    pub fn params(&self, dim: usize) -> SvrParams<f64> {
        let kernel = match self.kernel {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::Rbf { gamma: self.gamma.unwrap_or(1.0 / dim.max(1) as f64) },
        };
        SvrParams { kernel, c: self.c, epsilon: self.epsilon, tol: self.tol, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlcmConfig {
    pub levels: usize,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self { levels: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookConfig {
    /// Number of visual words.
    pub k: usize,
    pub max_iter: usize,
    /// Descriptors drawn (seeded) from the training pool for clustering.
    pub max_descriptors: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self { k: 300, max_iter: 50, max_descriptors: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub window: usize,
    pub threshold: f64,
    pub scales: Vec<f64>,
    /// Training examples kept per class.
    pub max_examples: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        let p = HeadParams::default();
        Self { window: p.window, threshold: p.threshold, scales: p.scales, max_examples: 2000 }
    }
}

impl HeadConfig {
    pub fn params(&self) -> HeadParams {
        HeadParams { window: self.window, threshold: self.threshold, scales: self.scales.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Training window stride; `None` means half a cell.
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub cell_size: usize,
    pub fourier: FourierParams,
    pub glcm: GlcmConfig,
    pub codebook: CodebookConfig,
    pub svr: SvrConfig,
    pub head: HeadConfig,
    pub sampling: SamplingConfig,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { stride: None }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            cell_size: 128,
            fourier: FourierParams::default(),
            glcm: GlcmConfig::default(),
            codebook: CodebookConfig::default(),
            svr: SvrConfig::default(),
            head: HeadConfig::default(),
            sampling: SamplingConfig::default(),
            seed: 0,
        }
    }
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_slice(bytes).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.cell_size).expect("validated cell size")
    }

    pub fn stride(&self) -> usize {
        self.sampling.stride.unwrap_or(self.cell_size / 2).max(1)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |ok: bool, msg: String| if ok { Ok(()) } else { Err(ConfigError::Range(msg)) };
        range(
            (MIN_CELL_SIZE..=4096).contains(&self.cell_size),
            format!("cell_size {} not in [{MIN_CELL_SIZE}, 4096]", self.cell_size),
        )?;
        range(
            self.fourier.cutoff > 0.0 && self.fourier.cutoff <= 1.0,
            format!("fourier.cutoff {} not in (0, 1]", self.fourier.cutoff),
        )?;
        range(
            self.fourier.peak_sigma.is_finite() && self.fourier.peak_sigma.abs() <= 10.0,
            format!("fourier.peak_sigma {} not in [-10, 10]", self.fourier.peak_sigma),
        )?;
        range((2..=256).contains(&self.glcm.levels), format!("glcm.levels {} not in [2, 256]", self.glcm.levels))?;
        range(self.codebook.k >= 1, "codebook.k must be at least 1".into())?;
        range(self.codebook.max_iter >= 1, "codebook.max_iter must be at least 1".into())?;
        range(
            self.codebook.max_descriptors >= self.codebook.k,
            "codebook.max_descriptors must be at least codebook.k".into(),
        )?;
        range(self.svr.c > 0.0 && self.svr.c.is_finite(), format!("svr.c {} must be positive", self.svr.c))?;
        range(
            self.svr.epsilon >= 0.0 && self.svr.epsilon.is_finite(),
            format!("svr.epsilon {} must be nonnegative", self.svr.epsilon),
        )?;
        range(self.svr.tol > 0.0 && self.svr.tol.is_finite(), format!("svr.tol {} must be positive", self.svr.tol))?;
        range(self.svr.max_iter >= 1, "svr.max_iter must be at least 1".into())?;
        if let Some(g) = self.svr.gamma {
            range(g > 0.0 && g.is_finite(), format!("svr.gamma {g} must be positive"))?;
        }
        range(
            self.head.window >= 8 && self.head.window <= self.cell_size,
            format!("head.window {} not in [8, cell_size]", self.head.window),
        )?;
        range(self.head.threshold.is_finite(), "head.threshold must be finite".into())?;
        range(
            !self.head.scales.is_empty() && self.head.scales.iter().all(|&s| s > 0.0 && s.is_finite()),
            "head.scales must be a nonempty list of positive factors".into(),
        )?;
        range(self.head.max_examples >= 10, "head.max_examples must be at least 10".into())?;
        if let Some(s) = self.sampling.stride {
            range(s >= 1 && s <= self.cell_size, format!("sampling.stride {s} not in [1, cell_size]"))?;
        }
        Ok(())
    }

    /// SHA-256 over every setting except the seed; models record it and refuse a
    /// different one at inference.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("seed");
        }
        let canonical = serde_json::to_vec(&value).expect("value serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = Config::new();
        c.validate().unwrap();
        assert_eq!(c.cell_size, 128);
        assert_eq!(c.stride(), 64);
        assert_eq!(c.codebook.k, 300);
        assert_eq!(c.glcm.levels, 8);
        assert_eq!(c.fourier.cutoff, 0.25);
        assert_eq!(Config::from_json(b"{}").unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::from_json(br#"{"cell_sise": 64}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(Config::from_json(br#"{"svr": {"C": 3}}"#), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn ranges_are_enforced() {
        assert!(matches!(Config::from_json(br#"{"cell_size": 16}"#), Err(ConfigError::Range(_))));
        assert!(matches!(Config::from_json(br#"{"fourier": {"cutoff": 0}}"#), Err(ConfigError::Range(_))));
        assert!(matches!(Config::from_json(br#"{"head": {"scales": []}}"#), Err(ConfigError::Range(_))));
    }

    #[test]
    fn fingerprint_ignores_seed_only() {
        let a = Config::new();
        let mut b = a.clone();
        b.seed = 99;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.cell_size = 64;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}

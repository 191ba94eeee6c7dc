//! Per-cell evidence from the five sources and its fixed-order fusion row.

use crate::config::Config;
use crate::imaging::Patch;
use crate::sources::fourier::{fourier_analyze, FourierOutput};
use crate::sources::glcm::{glcm_count, glcm_features, quantize, GlcmFeatures};
use crate::sources::head::{detect_heads, head_stats, HeadFilter, HeadSourceOutput};
use crate::sources::interest::{
    crowd_confidence, extract_descriptors, interest_count, word_histogram, Codebook, Descriptor, PoissonRates,
};
use crate::sources::wavelet::{wavelet_count, wavelet_features, WaveletFeatures, SUBBAND_NAMES};
use crate::sources::SourceError;
use crate::learn::CountRegressor;

use super::PipelineError;

pub const ROW_LAYOUT_VERSION: &str = "cell-row-v1";

/// Source-specific features that do not depend on any trained component.
#[derive(Debug, Clone)]
pub struct CellEvidence {
    pub descriptors: Vec<Descriptor<f64>>,
    pub fourier: FourierOutput<f64>,
    pub glcm: GlcmFeatures<f64>,
    pub wavelet: WaveletFeatures<f64>,
}

fn tag(source: &'static str) -> impl Fn(SourceError) -> PipelineError {
    move |error| PipelineError::Source { source_name: source, error }
}

pub fn cell_evidence(p: &Patch<f64>, config: &Config) -> Result<CellEvidence, PipelineError> {
    let descriptors = extract_descriptors(p);
    let fourier = fourier_analyze(p, &config.fourier).map_err(tag("fourier"))?;
    let q = quantize(p, config.glcm.levels).map_err(tag("glcm"))?;
    let glcm = glcm_features(&q).map_err(tag("glcm"))?;
    let wavelet = wavelet_features(p).map_err(tag("wavelet"))?;
    Ok(CellEvidence { descriptors, fourier, glcm, wavelet })
}

/// Trained source components needed to turn evidence into a fusion row.
#[derive(Debug, Clone, Copy)]
pub struct SourceModels<'a> {
    pub config: &'a Config,
    pub codebook: &'a Codebook<f64>,
    pub rates: &'a PoissonRates<f64>,
    pub interest: &'a CountRegressor<f64>,
    pub glcm: &'a CountRegressor<f64>,
    pub wavelet: &'a CountRegressor<f64>,
    pub head: &'a HeadFilter<f64>,
}

/// The fusion input for one cell; see [`column_names`] for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFeatureRow {
    pub values: Vec<f64>,
}

pub fn row_dim() -> usize {
    column_names().len()
}

pub fn column_names() -> Vec<String> {
    let mut names = vec!["interest_count".to_string(), "crowd_confidence".into(), "fourier_maxima".into()];
    for part in ["recon", "residual"] {
        for m in ["entropy", "mean", "variance", "skewness", "kurtosis"] {
            names.push(format!("fourier_{part}_{m}"));
        }
    }
    names.push("glcm_count".into());
    for deg in crate::sources::glcm::ANGLES_DEG {
        for f in ["dissimilarity", "homogeneity", "energy", "entropy"] {
            names.push(format!("glcm_{deg}_{f}"));
        }
    }
    for deg in crate::sources::glcm::ANGLES_DEG {
        for m in ["variance", "skewness", "kurtosis"] {
            names.push(format!("glcm_matrix_{deg}_{m}"));
        }
    }
    names.push("wavelet_count".into());
    for b in SUBBAND_NAMES {
        names.push(format!("wavelet_energy_{b}"));
    }
    for b in SUBBAND_NAMES {
        for m in ["variance", "skewness", "kurtosis"] {
            names.push(format!("wavelet_{b}_{m}"));
        }
    }
    for n in ["eta_head", "head_scale_mean", "head_scale_var", "head_conf_mean", "head_conf_var"] {
        names.push(n.into());
    }
    names
}

/// Everything a cell contributes, including the per-source estimates.
#[derive(Debug, Clone)]
pub struct CellSources {
    pub interest_count: f64,
    pub crowd_confidence: f64,
    pub glcm_count: f64,
    pub wavelet_count: f64,
    pub head: HeadSourceOutput<f64>,
}

pub fn source_outputs(p: &Patch<f64>, ev: &CellEvidence, m: &SourceModels<'_>) -> Result<CellSources, PipelineError> {
    let hist = word_histogram(&ev.descriptors, m.codebook).map_err(tag("interest"))?;
    let interest_count = interest_count(&hist, m.interest).map_err(tag("interest"))?;
    let crowd_confidence = crowd_confidence(&hist, m.rates).map_err(tag("interest"))?;
    let glcm_count = glcm_count(&ev.glcm, m.glcm).map_err(tag("glcm"))?;
    let wavelet_count = wavelet_count(&ev.wavelet, m.wavelet).map_err(tag("wavelet"))?;
    let params = m.config.head.params();
    let dets = detect_heads(p, m.head, params.threshold, &params.scales);
    Ok(CellSources { interest_count, crowd_confidence, glcm_count, wavelet_count, head: head_stats(&dets) })
}

pub fn assemble_row(ev: &CellEvidence, s: &CellSources) -> CellFeatureRow {
    let mut v = Vec::with_capacity(88);
    v.push(s.interest_count);
    v.push(s.crowd_confidence);
    v.push(ev.fourier.maxima_count);
    v.extend(ev.fourier.recon_stats.to_array());
    v.extend(ev.fourier.residual_stats.to_array());
    v.push(s.glcm_count);
    v.extend(ev.glcm.to_vec());
    v.extend(ev.glcm.matrix_stats);
    v.push(s.wavelet_count);
    v.extend(ev.wavelet.energies);
    v.extend(ev.wavelet.subband_stats);
    let h = &s.head;
    v.extend([h.eta_head as f64, h.scale_mean, h.scale_var, h.conf_mean, h.conf_var]);
    for x in v.iter_mut() {
        if !x.is_finite() {
            *x = 0.0;
        }
    }
    CellFeatureRow { values: v }
}

/// Runs all five sources on a cell and assembles its fusion row.
pub fn extract_cell_row(p: &Patch<f64>, models: &SourceModels<'_>) -> Result<CellFeatureRow, PipelineError> {
    let ev = cell_evidence(p, models.config)?;
    let s = source_outputs(p, &ev, models)?;
    Ok(assemble_row(&ev, &s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_has_88_columns() {
        let names = column_names();
        assert_eq!(names.len(), 88);
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 88);
    }
}

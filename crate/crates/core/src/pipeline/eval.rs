use std::path::Path;

use serde::{Deserialize, Serialize};

use super::count::count_image;
use super::model::TrainedModel;
use super::{write_atomic, write_csv, PipelineError};
use crate::dataset::{cell_ground_truth, Sample};

/// Mean and population standard deviation of AE and NAE over a set of pairs.
/// Pairs with zero ground truth have no NAE; they are left out of the NAE
/// statistics and counted in `nae_excluded`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub mean_ae: f64,
    pub std_ae: f64,
    pub mean_nae: f64,
    pub std_nae: f64,
    pub nae_n: usize,
    pub nae_excluded: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn nae(gt: f64, est: f64) -> Option<f64> {
    (gt != 0.0).then(|| (gt - est).abs() / gt)
}

/// Error summary of estimates against ground truth.
pub fn evaluate(gt: &[f64], est: &[f64]) -> Result<ErrorSummary, PipelineError> {
    if gt.is_empty() || gt.len() != est.len() {
        return Err(PipelineError::Eval(format!("need matching nonempty vectors, got {} and {}", gt.len(), est.len())));
    }
    if gt.iter().chain(est).any(|v| !v.is_finite()) {
        return Err(PipelineError::Eval("non-finite count".into()));
    }
    let ae: Vec<f64> = gt.iter().zip(est).map(|(g, e)| (g - e).abs()).collect();
    let naes: Vec<f64> = gt.iter().zip(est).filter_map(|(&g, &e)| nae(g, e)).collect();
    let (mean_ae, std_ae) = mean_std(&ae);
    let (mean_nae, std_nae) = mean_std(&naes);
    Ok(ErrorSummary {
        n: gt.len(),
        mean_ae,
        std_ae,
        mean_nae,
        std_nae,
        nae_n: naes.len(),
        nae_excluded: gt.len() - naes.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub gt: f64,
    pub est: f64,
    pub ae: f64,
    pub nae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub image_id: String,
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    pub gt: f64,
    pub est: f64,
    pub ae: f64,
    pub nae: Option<f64>,
}

/// Per-image patch error, one row per image ordered by ground-truth count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchAnalysisRow {
    pub image_id: String,
    pub gt: f64,
    pub patches: usize,
    pub patch_mean_ae: f64,
    pub patch_std_ae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub images: Vec<ImageRecord>,
    pub patches: Vec<PatchRecord>,
    pub image_summary: ErrorSummary,
    pub patch_summary: ErrorSummary,
}

impl EvalReport {
    /// Builds the summaries from the records.
    pub fn from_records(images: Vec<ImageRecord>, patches: Vec<PatchRecord>) -> Result<Self, PipelineError> {
        let image_summary = evaluate(
            &images.iter().map(|r| r.gt).collect::<Vec<_>>(),
            &images.iter().map(|r| r.est).collect::<Vec<_>>(),
        )?;
        let patch_summary = evaluate(
            &patches.iter().map(|r| r.gt).collect::<Vec<_>>(),
            &patches.iter().map(|r| r.est).collect::<Vec<_>>(),
        )?;
        Ok(Self { images, patches, image_summary, patch_summary })
    }

    /// Writes `images.csv`, `patches.csv`, `patch_analysis.csv` and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        write_csv(&dir.join("images.csv"), &self.images)?;
        write_csv(&dir.join("patches.csv"), &self.patches)?;
        write_csv(&dir.join("patch_analysis.csv"), &patch_analysis(self))?;
        let summary = serde_json::json!({ "image": self.image_summary, "patch": self.patch_summary });
        write_atomic(&dir.join("summary.json"), &serde_json::to_vec_pretty(&summary).expect("summary serializes"))
    }
}

/// Mean absolute error per patch for each image, sorted by ground truth (ties by id).
pub fn patch_analysis(report: &EvalReport) -> Vec<PatchAnalysisRow> {
    let mut rows: Vec<PatchAnalysisRow> = report
        .images
        .iter()
        .map(|img| {
            let ae: Vec<f64> = report.patches.iter().filter(|p| p.image_id == img.image_id).map(|p| p.ae).collect();
            let (patch_mean_ae, patch_std_ae) = mean_std(&ae);
            PatchAnalysisRow { image_id: img.image_id.clone(), gt: img.gt, patches: ae.len(), patch_mean_ae, patch_std_ae }
        })
        .collect();
    rows.sort_by(|a, b| a.gt.total_cmp(&b.gt).then_with(|| a.image_id.cmp(&b.image_id)));
    rows
}

/// Counts every sample with `model` and scores images and grid cells.
pub fn evaluate_model(samples: &[Sample], model: &TrainedModel) -> Result<EvalReport, PipelineError> {
    let mut images = Vec::with_capacity(samples.len());
    let mut patches = Vec::new();
    for s in samples {
        let counted = count_image(&s.image, model)?;
        let rects: Vec<_> = counted.cells.iter().map(|c| c.rect).collect();
        let cell_gt = cell_ground_truth(&s.annotation, &rects);
        for (cell, g) in counted.cells.iter().zip(cell_gt) {
            let gt = g as f64;
            patches.push(PatchRecord {
                image_id: s.id.clone(),
                row: cell.rect.row,
                col: cell.rect.col,
                height: cell.rect.height,
                width: cell.rect.width,
                gt,
                est: cell.count,
                ae: (gt - cell.count).abs(),
                nae: nae(gt, cell.count),
            });
        }
        let gt = s.annotation.count() as f64;
        images.push(ImageRecord {
            image_id: s.id.clone(),
            gt,
            est: counted.total,
            ae: (gt - counted.total).abs(),
            nae: nae(gt, counted.total),
        });
    }
    EvalReport::from_records(images, patches)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let s = evaluate(&[100.0, 200.0], &[110.0, 180.0]).unwrap();
        assert_eq!(s.mean_ae, 15.0);
        assert!((s.mean_nae - 0.1).abs() < 1e-15);
        assert_eq!(s.std_ae, 5.0);
        assert_eq!(s.nae_excluded, 0);
    }

    #[test]
    fn perfect_predictions_give_zero_errors() {
        let x = [0.0, 3.0, 7.5];
        let s = evaluate(&x, &x).unwrap();
        assert_eq!((s.mean_ae, s.std_ae, s.mean_nae, s.std_nae), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((s.nae_n, s.nae_excluded), (2, 1));
    }

    #[test]
    fn zero_ground_truth_is_excluded_from_nae_only() {
        let s = evaluate(&[0.0, 10.0], &[4.0, 8.0]).unwrap();
        assert_eq!(s.mean_ae, 3.0);
        assert!((s.mean_nae - 0.2).abs() < 1e-15);
        assert_eq!(s.nae_excluded, 1);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(evaluate(&[], &[]).is_err());
        assert!(evaluate(&[1.0], &[1.0, 2.0]).is_err());
        assert!(evaluate(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn analysis_is_sorted_by_ground_truth() {
        let img = |id: &str, gt: f64| ImageRecord { image_id: id.into(), gt, est: gt, ae: 0.0, nae: None };
        let patch = |id: &str, ae: f64| PatchRecord {
            image_id: id.into(),
            row: 0,
            col: 0,
            height: 32,
            width: 32,
            gt: 1.0,
            est: 1.0 + ae,
            ae,
            nae: Some(ae),
        };
        let report = EvalReport::from_records(
            vec![img("b", 50.0), img("a", 10.0)],
            vec![patch("a", 1.0), patch("a", 3.0), patch("b", 2.0)],
        )
        .unwrap();
        let rows = patch_analysis(&report);
        assert_eq!(rows[0].image_id, "a");
        assert_eq!(rows[0].patch_mean_ae, 2.0);
        assert_eq!(rows[0].patch_std_ae, 1.0);
        assert_eq!(rows[1].patches, 1);
    }
}

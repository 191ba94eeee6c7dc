use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate_model, EvalReport};
use super::train::train;
use super::{write_atomic, PipelineError};
use crate::config::Config;
use crate::dataset::{make_folds, FoldSplit, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_ids: Vec<String>,
    pub model_digest: String,
    pub converged: bool,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub split: FoldSplit,
    pub folds: Vec<FoldReport>,
    /// All held-out predictions scored together.
    pub pooled: EvalReport,
}

impl CrossValReport {
    /// Writes `folds.json`, one `fold_<i>/` report per fold and `pooled/`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        for f in &self.folds {
            f.report.write(&dir.join(format!("fold_{}", f.fold)))?;
        }
        self.pooled.write(&dir.join("pooled"))?;
        let index: Vec<_> = self
            .folds
            .iter()
            .map(|f| {
                serde_json::json!({
                    "fold": f.fold,
                    "test_ids": f.test_ids,
                    "model_digest": f.model_digest,
                    "converged": f.converged,
                    "image": f.report.image_summary,
                    "patch": f.report.patch_summary,
                })
            })
            .collect();
        let doc = serde_json::json!({ "k": self.split.k, "seed": self.split.seed, "folds": index, "pooled": {
            "image": self.pooled.image_summary, "patch": self.pooled.patch_summary } });
        write_atomic(&dir.join("folds.json"), &serde_json::to_vec_pretty(&doc).expect("index serializes"))
    }
}

/// Trains on k-1 folds and tests on the remaining one, for every fold.
pub fn cross_validate(samples: &[Sample], k: usize, seed: u64, config: &Config) -> Result<CrossValReport, PipelineError> {
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let split = make_folds(&ids, k, seed)?;
    let mut folds = Vec::with_capacity(k);
    let mut images = Vec::new();
    let mut patches = Vec::new();
    for fold in 0..k {
        let (test, train_set): (Vec<Sample>, Vec<Sample>) =
            samples.iter().cloned().partition(|s| split.fold_of(&s.id) == Some(fold));
        let model = train(&train_set, config, seed.wrapping_add(fold as u64))?;
        let report = evaluate_model(&test, &model)?;
        images.extend(report.images.iter().cloned());
        patches.extend(report.patches.iter().cloned());
        folds.push(FoldReport {
            fold,
            test_ids: split.fold(fold).into_iter().map(String::from).collect(),
            model_digest: model.digest(),
            converged: model.diagnostics.converged,
            report,
        });
    }
    let pooled = EvalReport::from_records(images, patches)?;
    Ok(CrossValReport { split, folds, pooled })
}

//! Training, inference, evaluation and cross-validation over whole images.

mod count;
mod crossval;
mod eval;
pub mod features;
mod model;
mod train;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use count::{count_image, CellEstimate, ImageCount};
pub use crossval::{cross_validate, CrossValReport, FoldReport};
pub use eval::{
    evaluate, evaluate_model, patch_analysis, EvalReport, ErrorSummary, ImageRecord, PatchAnalysisRow, PatchRecord,
};
pub use features::{column_names, extract_cell_row, CellFeatureRow, SourceModels, ROW_LAYOUT_VERSION};
pub use model::{ModelError, TrainedModel, TrainingDiagnostics, MODEL_FORMAT_VERSION};
pub use train::train;

use crate::config::ConfigError;
use crate::dataset::DatasetError;
use crate::imaging::{GridError, ImageError};
use crate::sources::SourceError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{source_name} source: {error}")]
    Source { source_name: &'static str, error: SourceError },
    #[error("training stage '{stage}' failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("evaluation: {0}")]
    Eval(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    use std::io::Write;
    let io = |source| PipelineError::Io { path: path.to_owned(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Serializes `rows` as CSV with a header row and writes it atomically.
pub fn write_csv<R: serde::Serialize>(path: &Path, rows: &[R]) -> Result<(), PipelineError> {
    let err = |message: String| PipelineError::Csv { path: path.to_owned(), message };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| err(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| err(e.to_string()))?;
    write_atomic(path, &bytes)
}

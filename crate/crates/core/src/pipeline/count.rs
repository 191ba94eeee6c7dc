use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::extract_cell_row;
use super::model::TrainedModel;
use super::PipelineError;
use crate::imaging::{partition, CellRect, GrayImage};
use crate::sources::SourceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub rect: CellRect,
    /// Fusion prediction, clamped at zero.
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageCount {
    pub total: f64,
    pub cells: Vec<CellEstimate>,
}

impl ImageCount {
    pub fn from_cells(cells: Vec<CellEstimate>) -> Self {
        let total = cells.iter().map(|c| c.count).sum();
        Self { total, cells }
    }
}

/// Counts each cell of the disjoint grid independently and sums the cells.
pub fn count_image(img: &GrayImage<f64>, model: &TrainedModel) -> Result<ImageCount, PipelineError> {
    let cells = partition(img, &model.config.grid())?;
    let sources = model.sources();
    let estimates = cells
        .par_iter()
        .map(|p| {
            let row = extract_cell_row(p, &sources)?;
            let count = model
                .fusion
                .predict_count(&row.values)
                .map_err(|e| PipelineError::Source { source_name: "fusion", error: SourceError::Learn(e) })?;
            Ok(CellEstimate { rect: p.rect(), count })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(ImageCount::from_cells(estimates))
}

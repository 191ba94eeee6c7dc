use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GrayImage, ImageError, Patch, MIN_PATCH_SIDE};
use crate::scalar::Real;

/// Smallest permitted grid cell side.
pub const MIN_CELL_SIZE: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cell size {0} is below the minimum of {MIN_CELL_SIZE}")]
    CellTooSmall(usize),
    #[error("image {width}x{height} is smaller than the minimum analyzable cell ({MIN_PATCH_SIDE} px)")]
    ImageTooSmall { width: usize, height: usize },
    #[error("sampling stride must be positive")]
    ZeroStride,
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Square grid cells of `cell_size` pixels.
///
/// Edge policy: when the image side is not a multiple of the cell size, a trailing
/// remainder shorter than half a cell is merged into the last full cell; a longer
/// remainder forms its own, narrower cell. Sides shorter than one cell yield a
/// single cell spanning the whole side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    cell_size: usize,
}

impl GridSpec {
    pub fn new(cell_size: usize) -> Result<Self, GridError> {
        if cell_size < MIN_CELL_SIZE {
            return Err(GridError::CellTooSmall(cell_size));
        }
        Ok(Self { cell_size })
    }

    pub fn cell_size(&self) -> usize {
        self.cell_size
    }

    /// `(start, len)` segments along one axis of length `len`.
    pub fn segments(&self, len: usize) -> Vec<(usize, usize)> {
        let cell = self.cell_size;
        let full = len / cell;
        if full == 0 {
            return vec![(0, len)];
        }
        let rem = len % cell;
        let mut segs: Vec<(usize, usize)> = (0..full).map(|i| (i * cell, cell)).collect();
        if rem > 0 {
            if 2 * rem < cell {
                segs.last_mut().expect("at least one full cell").1 += rem;
            } else {
                segs.push((full * cell, rem));
            }
        }
        segs
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { cell_size: 128 }
    }
}

/// Pixel rectangle of a cell, top-left `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellRect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl CellRect {
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    /// Half-open containment `[row, row + height) x [col, col + width)` for a point
    /// given as `(x, y)` with `x` the column.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        y >= self.row as f64
            && y < (self.row + self.height) as f64
            && x >= self.col as f64
            && x < (self.col + self.width) as f64
    }
}

/// Cell rectangles of the disjoint grid over a `height x width` image, row-major.
pub fn partition_rects(height: usize, width: usize, grid: &GridSpec) -> Result<Vec<CellRect>, GridError> {
    if height < MIN_PATCH_SIDE || width < MIN_PATCH_SIDE {
        return Err(GridError::ImageTooSmall { width, height });
    }
    let rows = grid.segments(height);
    let cols = grid.segments(width);
    Ok(rows
        .iter()
        .flat_map(|&(row, h)| cols.iter().map(move |&(col, w)| CellRect { row, col, height: h, width: w }))
        .collect())
}

/// Splits the image into disjoint cells ordered row-major.
pub fn partition<T: Real>(img: &GrayImage<T>, grid: &GridSpec) -> Result<Vec<Patch<T>>, GridError> {
    partition_rects(img.height(), img.width(), grid)?
        .into_iter()
        .map(|rect| img.rect_patch(rect).map_err(GridError::from))
        .collect()
}

/// Overlapping `cell x cell` windows at the given stride, used for dense training
/// sampling. The last window on each axis is aligned to the image edge so the
/// whole image is covered; sides shorter than a cell get one full-length window.
pub fn sliding_rects(height: usize, width: usize, cell: usize, stride: usize) -> Result<Vec<CellRect>, GridError> {
    if stride == 0 {
        return Err(GridError::ZeroStride);
    }
    if height < MIN_PATCH_SIDE || width < MIN_PATCH_SIDE {
        return Err(GridError::ImageTooSmall { width, height });
    }
    let axis = |len: usize| -> Vec<(usize, usize)> {
        if len <= cell {
            return vec![(0, len)];
        }
        let mut starts: Vec<usize> = (0..=len - cell).step_by(stride).collect();
        if *starts.last().expect("nonempty") != len - cell {
            starts.push(len - cell);
        }
        starts.into_iter().map(|s| (s, cell)).collect()
    };
    let rows = axis(height);
    let cols = axis(width);
    Ok(rows
        .iter()
        .flat_map(|&(row, h)| cols.iter().map(move |&(col, w)| CellRect { row, col, height: h, width: w }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blank(w: usize, h: usize) -> GrayImage<f64> {
        GrayImage::new(w, h, vec![0.0; w * h]).unwrap()
    }

    #[test]
    fn exact_tiling_has_four_cells() {
        let cells = partition(&blank(256, 256), &GridSpec::new(128).unwrap()).unwrap();
        let origins: Vec<_> = cells.iter().map(|p| p.origin()).collect();
        assert_eq!(origins, vec![(0, 0), (0, 128), (128, 0), (128, 128)]);
        assert!(cells.iter().all(|p| p.width() == 128 && p.height() == 128));
    }

    #[test]
    fn ragged_edge_is_merged() {
        let cells = partition(&blank(300, 300), &GridSpec::new(128).unwrap()).unwrap();
        assert_eq!(cells.len(), 4);
        let area: usize = cells.iter().map(|p| p.area()).sum();
        assert_eq!(area, 90_000);
        assert_eq!(cells[3].width(), 172);
    }

    #[test]
    fn long_remainder_stands_alone() {
        let g = GridSpec::new(128).unwrap();
        assert_eq!(g.segments(320), vec![(0, 128), (128, 128), (256, 64)]);
        assert_eq!(g.segments(319), vec![(0, 128), (128, 191)]);
    }

    #[test]
    fn small_image_is_one_cell() {
        let cells = partition(&blank(64, 64), &GridSpec::new(128).unwrap()).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!((cells[0].width(), cells[0].height()), (64, 64));
    }

    #[test]
    fn too_small_inputs_are_rejected() {
        assert_eq!(GridSpec::new(16), Err(GridError::CellTooSmall(16)));
        assert!(matches!(
            partition(&blank(4, 40), &GridSpec::default()),
            Err(GridError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn sliding_windows_cover_edges() {
        let rects = sliding_rects(256, 300, 128, 64).unwrap();
        let cols: Vec<_> = rects.iter().filter(|r| r.row == 0).map(|r| r.col).collect();
        assert_eq!(cols, vec![0, 64, 128, 172]);
        assert_eq!(rects.len(), 3 * 4);
    }

    proptest! {
        #[test]
        fn grid_is_a_partition(w in 8usize..400, h in 8usize..400, cell in 32usize..160) {
            let rects = partition_rects(h, w, &GridSpec::new(cell).unwrap()).unwrap();
            let mut hits = vec![0u8; w * h];
            for r in &rects {
                for y in r.row..r.row + r.height {
                    for x in r.col..r.col + r.width {
                        hits[y * w + x] += 1;
                    }
                }
            }
            prop_assert!(hits.iter().all(|&n| n == 1));
            prop_assert_eq!(rects.iter().map(|r| r.area()).sum::<usize>(), w * h);
        }
    }
}

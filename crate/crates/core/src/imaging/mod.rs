//! Grayscale images, cell patches, grid partitioning, gradients and moment statistics.

mod grid;
mod pnm;
mod stats;

pub use grid::{partition, partition_rects, sliding_rects, CellRect, GridError, GridSpec, MIN_CELL_SIZE};
pub use pnm::{decode_image, encode_pgm, DecodeError};
pub use stats::{moment_stats, MomentStats, ENTROPY_BINS};

use thiserror::Error;

use crate::scalar::Real;

/// Smallest side length any feature source will analyze.
pub const MIN_PATCH_SIDE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {found} values but {width}x{height} needs {expected}")]
    DataLength { width: usize, height: usize, expected: usize, found: usize },
    #[error("pixel {index} is not finite")]
    NonFinite { index: usize },
    #[error("region {height}x{width} at ({row}, {col}) exceeds the {parent_height}x{parent_width} parent")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
        parent_height: usize,
        parent_width: usize,
    },
    #[error("patch is {width}x{height}, operation needs at least {min_width}x{min_height}")]
    TooSmall { width: usize, height: usize, min_width: usize, min_height: usize },
    #[error("cannot concatenate images of heights {left} and {right}")]
    HeightMismatch { left: usize, right: usize },
}

fn check_buffer<T: Real>(width: usize, height: usize, data: &[T]) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyDimensions { width, height });
    }
    let expected = width * height;
    if data.len() != expected {
        return Err(ImageError::DataLength { width, height, expected, found: data.len() });
    }
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(ImageError::NonFinite { index });
    }
    Ok(())
}

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T = f64> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self, ImageError> {
        check_buffer(width, height, &data)?;
        Ok(Self { width, height, data })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    /// Copies out the `height x width` region whose top-left corner is `(row, col)`.
    pub fn patch(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Patch<T>, ImageError> {
        if height == 0 || width == 0 || row + height > self.height || col + width > self.width {
            return Err(ImageError::OutOfBounds {
                row,
                col,
                height,
                width,
                parent_height: self.height,
                parent_width: self.width,
            });
        }
        let mut data = Vec::with_capacity(width * height);
        for r in row..row + height {
            let start = r * self.width + col;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(Patch { origin: (row, col), width, height, data })
    }

    pub fn rect_patch(&self, rect: CellRect) -> Result<Patch<T>, ImageError> {
        self.patch(rect.row, rect.col, rect.height, rect.width)
    }

    /// The whole image as a single patch at origin (0, 0).
    pub fn to_patch(&self) -> Patch<T> {
        Patch { origin: (0, 0), width: self.width, height: self.height, data: self.data.clone() }
    }

    /// Places `right` to the right of `self`.
    pub fn hconcat(&self, right: &GrayImage<T>) -> Result<GrayImage<T>, ImageError> {
        if self.height != right.height {
            return Err(ImageError::HeightMismatch { left: self.height, right: right.height });
        }
        let width = self.width + right.width;
        let mut data = Vec::with_capacity(width * self.height);
        for r in 0..self.height {
            data.extend_from_slice(&self.data[r * self.width..(r + 1) * self.width]);
            data.extend_from_slice(&right.data[r * right.width..(r + 1) * right.width]);
        }
        GrayImage::new(width, self.height, data)
    }
}

/// A rectangular region of an image. Source operations treat patches as standalone
/// arrays; `origin` only records where the cell came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch<T = f64> {
    origin: (usize, usize),
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> Patch<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self, ImageError> {
        check_buffer(width, height, &data)?;
        Ok(Self { origin: (0, 0), width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn with_origin(mut self, row: usize, col: usize) -> Self {
        self.origin = (row, col);
        self
    }

    /// `(row, col)` of the top-left pixel in the parent image.
    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn rect(&self) -> CellRect {
        CellRect { row: self.origin.0, col: self.origin.1, height: self.height, width: self.width }
    }

    pub fn require_min(&self, min_width: usize, min_height: usize) -> Result<(), ImageError> {
        if self.width < min_width || self.height < min_height {
            return Err(ImageError::TooSmall { width: self.width, height: self.height, min_width, min_height });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Patch<T> {
        Patch { origin: self.origin, width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Wrap-around shift: pixel `(r, c)` moves to `((r + dr) mod h, (c + dc) mod w)`.
    pub fn circular_shift(&self, dr: isize, dc: isize) -> Patch<T> {
        let (h, w) = (self.height as isize, self.width as isize);
        let mut data = vec![T::zero(); self.data.len()];
        for r in 0..h {
            for c in 0..w {
                let nr = (r + dr).rem_euclid(h);
                let nc = (c + dc).rem_euclid(w);
                data[(nr * w + nc) as usize] = self.data[(r * w + c) as usize];
            }
        }
        Patch { origin: self.origin, width: self.width, height: self.height, data }
    }

    /// Sub-region copy; coordinates are relative to this patch.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Patch<T>, ImageError> {
        if height == 0 || width == 0 || row + height > self.height || col + width > self.width {
            return Err(ImageError::OutOfBounds {
                row,
                col,
                height,
                width,
                parent_height: self.height,
                parent_width: self.width,
            });
        }
        let mut data = Vec::with_capacity(width * height);
        for r in row..row + height {
            let start = r * self.width + col;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(Patch { origin: (self.origin.0 + row, self.origin.1 + col), width, height, data })
    }
}

/// Gradient magnitude `sqrt(gx^2 + gy^2)` with central differences inside and
/// one-sided differences on the border rows and columns.
pub fn gradient_magnitude<T: Real>(p: &Patch<T>) -> Result<Patch<T>, ImageError> {
    p.require_min(2, 2)?;
    let (h, w) = (p.height, p.width);
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let gx = if c == 0 {
                p.get(r, 1) - p.get(r, 0)
            } else if c == w - 1 {
                p.get(r, w - 1) - p.get(r, w - 2)
            } else {
                (p.get(r, c + 1) - p.get(r, c - 1)) * half
            };
            let gy = if r == 0 {
                p.get(1, c) - p.get(0, c)
            } else if r == h - 1 {
                p.get(h - 1, c) - p.get(h - 2, c)
            } else {
                (p.get(r + 1, c) - p.get(r - 1, c)) * half
            };
            out.push(gx.hypot(gy));
        }
    }
    Ok(Patch { origin: p.origin, width: w, height: h, data: out })
}

//! The five per-cell count sources.

pub mod fourier;
pub mod glcm;
pub mod head;
pub mod interest;
pub mod wavelet;

use thiserror::Error;

use crate::imaging::ImageError;
use crate::learn::LearnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("model expects feature layout '{expected}', features are '{found}'")]
    Incompatible { expected: String, found: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    InsufficientData(String),
}

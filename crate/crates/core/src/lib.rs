//! Crowd counting in high-density still images.
//!
//! An image is cut into a grid of cells and every cell gets a count estimate that
//! fuses five sources:
//!
//! 1. **Interest points** – bag-of-visual-words regression plus a Poisson
//!    log-likelihood-ratio crowd confidence ([`sources::interest`]).
//! 2. **Fourier analysis** – peaks of the low-passed gradient ([`sources::fourier`]).
//! 3. **GLCM texture** – co-occurrence statistics ([`sources::glcm`]).
//! 4. **Wavelet energies** – three-level Haar pyramid ([`sources::wavelet`]).
//! 5. **Head detections** – a sliding-window linear filter ([`sources::head`]).
//!
//! A fusion ε-SVR maps the concatenated evidence to a cell count; the image count
//! is the sum over cells ([`pipeline`]).
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`). The training
//! pipeline and model files use `f64`; the aliases below name the common
//! concrete types.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod imaging;
pub mod learn;
pub mod pipeline;
pub mod scalar;
pub mod sources;
pub mod synth;

pub use scalar::Real;

pub type Image = imaging::GrayImage<f64>;
pub type Image32 = imaging::GrayImage<f32>;
pub type Cell = imaging::Patch<f64>;
pub type Cell32 = imaging::Patch<f32>;
pub type Moments = imaging::MomentStats<f64>;
pub type Svr = learn::SvrModel<f64>;
pub type Svr32 = learn::SvrModel<f32>;
pub type Regressor = learn::CountRegressor<f64>;
pub type Rates = sources::interest::PoissonRates<f64>;

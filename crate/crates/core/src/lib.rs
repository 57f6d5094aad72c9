//! Wavelet-pyramid generative codec.
//!
//! An image is encoded by repeatedly applying a 2D wavelet transform and
//! keeping only the low-frequency band. Learned per-level reconstructors
//! predict the discarded detail bands, a moment-matched prior samples new
//! latents with variance truncation, and a bilinear pixel-space pipeline
//! serves as the comparison baseline.

pub mod autodiff;
pub mod corpus;
mod container;
pub mod error;
pub mod image;
pub mod metrics;
pub mod pixel;
pub mod ppm;
pub mod prior;
pub mod pyramid;
pub mod recon;
pub mod wavelet;

pub use error::{Error, FormatError, Result};
pub use image::Image;

//! Compressed-sensing MRI reconstruction with a learned wavelet-domain
//! denoising prior.
//!
//! The pipeline: an undecimated Haar/Daubechies/Symlet tight frame lifts
//! complex images to 8-channel tensors; a small residual convolutional
//! network trained to predict injected Gaussian noise supplies the prior;
//! and a proximal-gradient loop alternates the prior's backward output
//! with an exact per-frequency least-squares data-consistency update.

pub mod data;
pub mod error;
pub mod image;
pub mod kspace;
pub mod metrics;
pub mod prior;
pub mod recon;
pub mod wavelet;

pub use error::{Error, Result};
pub use image::ComplexImage;

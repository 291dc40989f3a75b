//! Sparse signal subspace decomposition (3SD) over learned over-complete
//! dictionaries.
//!
//! The crate learns a dictionary from noisy image patches with K-SVD, sparse
//! codes every patch with orthogonal matching pursuit, ranks atoms by how
//! often they occur across the patch set, splits the dictionary into a
//! principal (signal) subspace and a residual (noise) subspace at the mode of
//! the atom-frequency histogram, and reconstructs the image from the
//! principal subspace only. A PCA/SVD baseline, synthetic noise models and
//! PSNR/SSIM metrics round out the denoising pipeline exposed by the `ssd3`
//! binary.

pub mod coding;
pub mod error;
pub mod image;
pub mod ksvd;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod patches;
pub mod pca;
pub mod pipeline;
mod rng;
pub mod subspace;
pub mod synthetic;

pub use crate::error::{Error, Result};
pub use crate::image::Image;
pub use crate::linalg::Mat;

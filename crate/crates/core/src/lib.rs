//! Map univariate empirical distributions onto a learned latent coordinate system.
//!
//! The pipeline runs in stages:
//!
//! - [`distgen`] draws labeled random variables from 13 distribution families.
//! - [`cdfcodec`] turns each variable into a modified-CDF grid (value bin x rank
//!   level, normalized counts) plus scalar summaries: normalized entropy, signed
//!   Kolmogorov-Smirnov skewness and K-S distance to the uniform CDF.
//! - [`neuralcore`] is a small dense-network engine with exact backpropagation.
//! - [`classifier`] trains the 13-way family classifier on grids or latent points.
//! - [`betavae`] trains a beta-VAE whose encoder means form the latent map.
//! - [`latentlab`] analyses that map: density, weight of evidence, segmentation,
//!   entropy-ordered trajectories, class maps and family overlap.
//! - [`cdfrepair`] converts decoded grids back into monotone CDF curves.

pub mod betavae;
pub mod cdfcodec;
pub mod cdfrepair;
pub mod classifier;
pub mod distgen;
mod error;
pub mod latentlab;
pub mod neuralcore;

pub use error::{Error, Result};

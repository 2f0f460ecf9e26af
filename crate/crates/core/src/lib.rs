//! Synthetic low-light dataset generation and image-quality evaluation.
//!
//! The crate turns ordinary well-exposed photographs into aligned
//! (dark, bright) training pairs by simulating a camera pipeline, and scores
//! restored images with PSNR and SSIM. The training-loss formulas used with
//! such pairs are provided as pure functions in [`metrics`].

pub mod color;
pub mod crf;
pub mod dataset;
pub mod degrade;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod rng;

pub use crf::{CrfDatabase, ResponseCurve};
pub use dataset::{GenerateOptions, Manifest, PairRecord};
pub use degrade::{Ablation, DegradeParams, PipelineConfig};
pub use error::{Error, ErrorClass, Result};
pub use image::{ColorSpace, ImageF, ValueRange};
pub use metrics::MetricReport;

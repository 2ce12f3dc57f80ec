//! Vessel segmentation and pixel classification for intracoronary OCT frames.
//!
//! The library covers the full processing chain from a raw polar frame to a
//! per-pixel vessel/background prediction:
//!
//! 1. **noise** – sharpness / impulse-noise / speckle assessment and median
//!    filtering of the polar frame.
//! 2. **guidewire** – detection of the guidewire shadow (a dark column band
//!    in polar view) and its removal by shift-and-blend.
//! 3. **transform** – polar ↔ Cartesian remapping with bilinear
//!    interpolation and angular wraparound.
//! 4. **segmentation** – Otsu global thresholding and two-cluster K-means
//!    over pixel intensities, with optional morphological refinement.
//! 5. **features** – 7-feature texture descriptors from 11×11 patches,
//!    labeling from the unsupervised mask, class balancing, splitting and
//!    standardization.
//! 6. **models** – logistic regression (batch gradient descent), RBF-kernel
//!    SVM (sequential minimal optimization), 2-component PCA, and
//!    confusion-matrix metrics.
//! 7. **phantom** – synthetic polar frames with known ground truth for
//!    testing every stage without clinical data.
//! 8. **pipeline** – end-to-end orchestration writing all intermediate
//!    artifacts plus a run report.
//!
//! All image buffers are row-major with the origin at the top-left; polar
//! frames store one A-line per column (columns = angle, rows = radius).
//! Every operation is a pure function of its inputs; seeded procedures use
//! the splittable generator in [`rng`], so outputs are reproducible
//! bit-for-bit regardless of thread count.

pub mod config;
pub mod error;
pub mod features;
pub mod guidewire;
pub mod models;
pub mod noise;
pub mod parallel;
pub mod phantom;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod segmentation;
pub mod transform;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use raster::{BinaryMask, GrayRaster};

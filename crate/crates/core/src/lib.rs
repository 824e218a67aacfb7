//! Iris recognition: edge-based segmentation, rubber-sheet normalization,
//! Haar wavelet features and a back-propagation classifier.

pub mod bpnn;
pub mod error;
pub mod exec;
pub mod features;
pub mod image;
pub mod normalize;
pub mod pipeline;
pub mod preprocess;

pub use error::{IrisError, Result, SegmentationStage};

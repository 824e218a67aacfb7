//! Locating the iris in an eye image.

pub mod canny;
pub mod hough;
pub mod segment;

pub use canny::{canny_edges, canny_relative, smoothed_gradient, CannyParams, EdgeMap, Gradient};
pub use hough::{hough_circle, hough_circle_with, hough_line, Circle, CircleSearch, CircleVote, LineSeg, Rect};
pub use segment::{build_noise_mask, eyelash_mask, eyelid_windows, segment_iris, IrisSegmentation, SegmentationConfig};

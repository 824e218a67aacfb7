use std::path::PathBuf;

use thiserror::Error;

/// Which Hough pass of the segmentation failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentationStage {
    Pupil,
    Iris,
}

impl std::fmt::Display for SegmentationStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SegmentationStage::Pupil => f.write_str("pupil"),
            SegmentationStage::Iris => f.write_str("iris"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IrisError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("no circle found: {0}")]
    NoCircleFound(String),

    #[error("segmentation failed at {stage} stage: {reason}")]
    SegmentationFailed {
        stage: SegmentationStage,
        reason: String,
    },

    #[error("matrix has odd dimension {rows}x{cols}")]
    OddDimension { rows: usize, cols: usize },

    #[error("every cell of the normalized texture is masked")]
    AllMasked,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("subject ids are not contiguous: {0}")]
    Contiguity(String),

    #[error("subject {subject} has too few images ({count})")]
    TooFewImages { subject: u32, count: usize },

    #[error("{failed} of {total} images failed the pipeline")]
    PipelineFailures { failed: usize, total: usize },

    #[error("worker pool: {0}")]
    Pool(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IrisError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IrisError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        IrisError::Dimension(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, IrisError>;

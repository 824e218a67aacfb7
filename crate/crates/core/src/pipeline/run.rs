use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{IrisError, Result};
use crate::features::{extract_features, FeatureVector};
use crate::image::GrayImage;
use crate::normalize::{rubber_sheet, NormalizedIris, DEFAULT_ANGULAR_RES, DEFAULT_RADIAL_RES};
use crate::preprocess::{segment_iris, IrisSegmentation, SegmentationConfig};

use super::manifest::ManifestEntry;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seg: SegmentationConfig,
    pub radial_res: usize,
    pub angular_res: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seg: SegmentationConfig::default(),
            radial_res: DEFAULT_RADIAL_RES,
            angular_res: DEFAULT_ANGULAR_RES,
        }
    }
}

/// Intermediate products of one image.
#[derive(Debug, Clone)]
pub struct ProcessedImage {
    pub segmentation: IrisSegmentation,
    pub normalized: NormalizedIris,
    pub features: FeatureVector,
}

pub fn process_image(img: &GrayImage, cfg: &PipelineConfig) -> Result<ProcessedImage> {
    let segmentation = segment_iris(img, &cfg.seg)?;
    let normalized = rubber_sheet(img, &segmentation, cfg.radial_res, cfg.angular_res)?;
    let features = extract_features(&normalized)?;
    Ok(ProcessedImage {
        segmentation,
        normalized,
        features,
    })
}

#[derive(Debug, Clone)]
pub struct ImageFailure {
    pub path: PathBuf,
    pub subject: u32,
    pub reason: String,
}

/// Features of the images that made it through, in manifest order.
#[derive(Debug, Clone, Default)]
pub struct PipelineRun {
    pub features: Vec<FeatureVector>,
    pub failures: Vec<ImageFailure>,
}

impl PipelineRun {
    pub fn total(&self) -> usize {
        self.features.len() + self.failures.len()
    }

    pub fn failure_rate(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        self.failures.len() as f64 / self.total() as f64
    }

    /// Errors if more than `max_rate` of the images failed.
    pub fn ensure_failure_rate(&self, max_rate: f64) -> Result<()> {
        if self.total() == 0 {
            return Err(IrisError::EmptyDataset);
        }
        if self.failure_rate() > max_rate {
            return Err(IrisError::PipelineFailures {
                failed: self.failures.len(),
                total: self.total(),
            });
        }
        Ok(())
    }
}

/// Runs every entry through segmentation, normalization and feature
/// extraction. Per-image errors are collected, not propagated.
pub fn run_pipeline(entries: &[ManifestEntry], cfg: &PipelineConfig) -> PipelineRun {
    let results = crate::exec::map_ordered(entries, |e| {
        GrayImage::load(&e.path).and_then(|img| process_image(&img, cfg))
    });
    let mut run = PipelineRun::default();
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok(p) => run.features.push(FeatureVector {
                values: p.features.values,
                subject: Some(e.subject),
            }),
            Err(err) => {
                log::warn!("{}: {err}", e.path.display());
                run.failures.push(ImageFailure {
                    path: e.path.clone(),
                    subject: e.subject,
                    reason: err.to_string(),
                });
            }
        }
    }
    run
}

pub fn features_csv(features: &[FeatureVector]) -> String {
    let width = features.first().map_or(0, |f| f.len());
    let mut s = String::from("subject_id");
    for k in 0..width {
        let _ = write!(s, ",f{k}");
    }
    s.push('\n');
    for f in features {
        s.push_str(&f.to_csv_row());
        s.push('\n');
    }
    s
}

pub fn write_features_csv(path: &Path, features: &[FeatureVector]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| IrisError::io(parent, e))?;
    }
    fs::write(path, features_csv(features)).map_err(|e| IrisError::io(path, e))
}

pub fn parse_features_csv(text: &str) -> Result<Vec<FeatureVector>> {
    let mut out: Vec<FeatureVector> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("subject_id") {
            continue;
        }
        let fv = FeatureVector::from_csv_row(line, i + 1)?;
        if let Some(first) = out.first() {
            if first.len() != fv.len() {
                return Err(IrisError::Parse {
                    line: i + 1,
                    msg: format!("row has {} features, expected {}", fv.len(), first.len()),
                });
            }
        }
        out.push(fv);
    }
    Ok(out)
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    if !path.exists() {
        return Err(IrisError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| IrisError::io(path, e))?;
    parse_features_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let feats = vec![
            FeatureVector {
                values: vec![1.5, -0.25, 1e-300],
                subject: Some(0),
            },
            FeatureVector {
                values: vec![0.1, 0.2, 0.3],
                subject: Some(7),
            },
        ];
        let text = features_csv(&feats);
        assert!(text.starts_with("subject_id,f0,f1,f2\n"));
        assert_eq!(parse_features_csv(&text).unwrap(), feats);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matches!(
            parse_features_csv("subject_id,f0,f1\n0,1,2\n1,3\n"),
            Err(IrisError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn failure_rate_threshold() {
        let mut run = PipelineRun::default();
        assert!(run.ensure_failure_rate(0.2).is_err());
        for _ in 0..4 {
            run.features.push(FeatureVector {
                values: vec![0.0],
                subject: Some(0),
            });
        }
        run.failures.push(ImageFailure {
            path: "x".into(),
            subject: 0,
            reason: "r".into(),
        });
        assert!(run.ensure_failure_rate(0.2).is_ok());
        run.failures.push(run.failures[0].clone());
        assert!(matches!(
            run.ensure_failure_rate(0.2),
            Err(IrisError::PipelineFailures { failed: 2, total: 6 })
        ));
    }
}

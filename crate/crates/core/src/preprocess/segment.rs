//! Iris localization: pupil and limbus circles, eyelid lines, occlusion mask.

use std::fmt::Write as _;

use crate::error::{IrisError, Result, SegmentationStage};
use crate::image::{GrayImage, Mask};
use crate::preprocess::canny::{canny_relative, CannyParams, EdgeMap};
use crate::preprocess::hough::{hough_circle_with, hough_line, Circle, CircleSearch, LineSeg, Rect};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    pub canny: CannyParams,
    pub pupil_r_min: usize,
    pub pupil_r_max: usize,
    pub iris_r_min: usize,
    pub iris_r_max: usize,
    pub vote_floor_ratio: f64,
    /// Intensities are clamped to this ceiling before the pupil edge pass,
    /// which leaves only the dark pupil boundary with strong contrast.
    /// `None` runs the pupil pass on the raw image.
    pub pupil_intensity_ceiling: Option<u8>,
    /// Limbus centers are searched within this many pixels of the pupil center.
    /// `None` searches the whole image.
    pub iris_center_tolerance: Option<f64>,
    /// Eyelid vote threshold as a fraction of the search window width.
    pub eyelid_vote_ratio: f64,
    pub dark_threshold: u8,
    /// Edges within this distance of a detected circle are ignored by the eyelid search.
    pub boundary_margin: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            canny: CannyParams::default(),
            pupil_r_min: 20,
            pupil_r_max: 80,
            iris_r_min: 80,
            iris_r_max: 150,
            vote_floor_ratio: 0.4,
            pupil_intensity_ceiling: Some(100),
            iris_center_tolerance: Some(15.0),
            eyelid_vote_ratio: 0.25,
            dark_threshold: 40,
            boundary_margin: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrisSegmentation {
    pub pupil: Circle,
    pub iris: Circle,
    /// `true` marks occluded or out-of-annulus pixels.
    pub noise_mask: Mask,
    pub upper_eyelid: Option<LineSeg>,
    pub lower_eyelid: Option<LineSeg>,
}

/// `true` exactly where the pixel is darker than `dark_threshold`.
pub fn eyelash_mask(img: &GrayImage, dark_threshold: u8) -> Mask {
    let cells = img.pixels().iter().map(|&p| p < dark_threshold).collect();
    Mask::new(img.width(), img.height(), cells).expect("same dimensions as image")
}

fn clamp_intensity(img: &GrayImage, ceiling: u8) -> GrayImage {
    let pixels = img.pixels().iter().map(|&p| p.min(ceiling)).collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("same dimensions as image")
}

fn fail(stage: SegmentationStage, err: IrisError) -> IrisError {
    IrisError::SegmentationFailed {
        stage,
        reason: err.to_string(),
    }
}

fn filter_edges(edges: &EdgeMap, keep: impl Fn(f64, f64) -> bool) -> EdgeMap {
    let mut out = edges.clone();
    for y in 0..edges.height() {
        for x in 0..edges.width() {
            if edges.get(x, y) && !keep(x as f64, y as f64) {
                out.set(x, y, false);
            }
        }
    }
    out
}

/// Eyelid search windows: the upper and lower thirds of the iris bounding box.
pub fn eyelid_windows(iris: &Circle, w: usize, h: usize) -> (Rect, Rect) {
    let x0 = (iris.cx - iris.r).ceil().max(0.0) as usize;
    let x1 = ((iris.cx + iris.r).floor() + 1.0).max(0.0) as usize;
    let top = (iris.cy - iris.r).ceil().max(0.0) as usize;
    let upper_end = (iris.cy - iris.r / 3.0).floor().max(0.0) as usize;
    let lower_start = ((iris.cy + iris.r / 3.0).ceil() + 1.0).max(0.0) as usize;
    let bottom = ((iris.cy + iris.r).floor() + 1.0).max(0.0) as usize;
    (
        Rect::new(x0, top, x1, upper_end).clip(w, h),
        Rect::new(x0, lower_start, x1, bottom).clip(w, h),
    )
}

/// Locates the pupil, the limbus and the eyelids, and builds the noise mask.
pub fn segment_iris(img: &GrayImage, cfg: &SegmentationConfig) -> Result<IrisSegmentation> {
    let (w, h) = (img.width(), img.height());
    if w < 2 * cfg.pupil_r_min + 1 || h < 2 * cfg.pupil_r_min + 1 {
        return Err(IrisError::dim(format!(
            "{w}x{h} image cannot contain a pupil of radius {}",
            cfg.pupil_r_min
        )));
    }

    // pupil pass
    let pupil_src = match cfg.pupil_intensity_ceiling {
        Some(c) => clamp_intensity(img, c),
        None => img.clone(),
    };
    let pupil_edges = canny_relative(&pupil_src, &cfg.canny).map_err(|e| fail(SegmentationStage::Pupil, e))?;
    let pupil_search = CircleSearch {
        r_min: cfg.pupil_r_min,
        r_max: cfg.pupil_r_max,
        center_window: None,
        vote_floor_ratio: cfg.vote_floor_ratio,
    };
    let pupil = hough_circle_with(&pupil_edges, &pupil_search)
        .map_err(|e| fail(SegmentationStage::Pupil, e))?
        .circle();

    // limbus pass, ignoring everything inside the pupil
    let edges = canny_relative(img, &cfg.canny).map_err(|e| fail(SegmentationStage::Iris, e))?;
    let exclusion = pupil.r + cfg.boundary_margin + 1.0;
    let iris_edges = filter_edges(&edges, |x, y| (x - pupil.cx).hypot(y - pupil.cy) > exclusion);
    let r_min = cfg.iris_r_min.max(pupil.r as usize + 1);
    if r_min >= cfg.iris_r_max {
        return Err(fail(
            SegmentationStage::Iris,
            IrisError::InvalidArgument(format!(
                "pupil radius {} leaves no limbus search range below {}",
                pupil.r, cfg.iris_r_max
            )),
        ));
    }
    let iris_search = CircleSearch {
        r_min,
        r_max: cfg.iris_r_max,
        center_window: cfg
            .iris_center_tolerance
            .map(|t| Rect::around(pupil.cx, pupil.cy, t, w, h)),
        vote_floor_ratio: cfg.vote_floor_ratio,
    };
    let iris = hough_circle_with(&iris_edges, &iris_search)
        .map_err(|e| fail(SegmentationStage::Iris, e))?
        .circle();
    if pupil.r >= iris.r || !iris.contains(pupil.cx, pupil.cy) {
        return Err(fail(
            SegmentationStage::Iris,
            IrisError::NoCircleFound(format!(
                "limbus {iris:?} does not enclose pupil {pupil:?}"
            )),
        ));
    }

    // eyelids
    let margin = cfg.boundary_margin;
    let lid_edges = filter_edges(&edges, |x, y| {
        let dp = (x - pupil.cx).hypot(y - pupil.cy);
        let di = (x - iris.cx).hypot(y - iris.cy);
        dp > pupil.r + margin && (di - iris.r).abs() > margin
    });
    let (upper_win, lower_win) = eyelid_windows(&iris, w, h);
    let threshold = |r: &Rect| (cfg.eyelid_vote_ratio * r.width() as f64).ceil() as u32;
    let upper_eyelid = hough_line(&lid_edges, upper_win, threshold(&upper_win));
    let lower_eyelid = hough_line(&lid_edges, lower_win, threshold(&lower_win));

    let noise_mask = build_noise_mask(img, &pupil, &iris, [upper_eyelid, lower_eyelid], cfg.dark_threshold);
    Ok(IrisSegmentation {
        pupil,
        iris,
        noise_mask,
        upper_eyelid,
        lower_eyelid,
    })
}

/// Union of dark pixels, pixels outside the (1 px dilated) annulus, and
/// pixels on the far side of each eyelid line from the iris center.
pub fn build_noise_mask(
    img: &GrayImage,
    pupil: &Circle,
    iris: &Circle,
    lids: [Option<LineSeg>; 2],
    dark_threshold: u8,
) -> Mask {
    let mut mask = eyelash_mask(img, dark_threshold);
    let lid_sides: Vec<(LineSeg, f64)> = lids
        .iter()
        .flatten()
        .map(|l| (*l, l.signed_distance(iris.cx, iris.cy).signum()))
        .collect();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (fx, fy) = (x as f64, y as f64);
            let dp = (fx - pupil.cx).hypot(fy - pupil.cy);
            let di = (fx - iris.cx).hypot(fy - iris.cy);
            let outside = dp < pupil.r - 1.0 || di > iris.r + 1.0;
            let lidded = lid_sides
                .iter()
                .any(|(l, side)| l.signed_distance(fx, fy) * side < 0.0);
            if outside || lidded {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

fn fmt_line(l: &Option<LineSeg>) -> String {
    match l {
        Some(l) => format!("{} {} {}", l.rho, l.theta, l.votes),
        None => "none".into(),
    }
}

impl IrisSegmentation {
    /// Plain-text record:
    ///
    /// ```text
    /// IRIS-SEGMENTATION 1
    /// size <width> <height>
    /// pupil <cx> <cy> <r>
    /// iris <cx> <cy> <r>
    /// upper_eyelid none | <rho> <theta> <votes>
    /// lower_eyelid none | <rho> <theta> <votes>
    /// mask_rle <n> <run_0> ... <run_n-1>
    /// ```
    ///
    /// Mask runs alternate unmasked/masked in row-major order, starting with
    /// an unmasked run that may be zero.
    pub fn to_record(&self) -> String {
        let mut s = String::from("IRIS-SEGMENTATION 1\n");
        let m = &self.noise_mask;
        let _ = writeln!(s, "size {} {}", m.width(), m.height());
        let _ = writeln!(s, "pupil {} {} {}", self.pupil.cx, self.pupil.cy, self.pupil.r);
        let _ = writeln!(s, "iris {} {} {}", self.iris.cx, self.iris.cy, self.iris.r);
        let _ = writeln!(s, "upper_eyelid {}", fmt_line(&self.upper_eyelid));
        let _ = writeln!(s, "lower_eyelid {}", fmt_line(&self.lower_eyelid));
        let runs = m.to_runs();
        let _ = write!(s, "mask_rle {}", runs.len());
        for r in runs {
            let _ = write!(s, " {r}");
        }
        s.push('\n');
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (i, line) = lines.next().ok_or_else(|| IrisError::Parse {
                line: 0,
                msg: format!("missing `{key}` line"),
            })?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(IrisError::Parse {
                    line: i + 1,
                    msg: format!("expected `{key}`"),
                });
            }
            Ok((i + 1, parts.map(str::to_owned).collect()))
        };
        fn nums<T: std::str::FromStr>(line: usize, parts: &[String], n: usize) -> Result<Vec<T>> {
            if parts.len() != n {
                return Err(IrisError::Parse {
                    line,
                    msg: format!("expected {n} values, found {}", parts.len()),
                });
            }
            parts
                .iter()
                .map(|p| {
                    p.parse::<T>().map_err(|_| IrisError::Parse {
                        line,
                        msg: format!("bad number `{p}`"),
                    })
                })
                .collect()
        }
        let (l, v) = next("IRIS-SEGMENTATION")?;
        if v != ["1"] {
            return Err(IrisError::Parse {
                line: l,
                msg: "unsupported record version".into(),
            });
        }
        let (l, v) = next("size")?;
        let size: Vec<usize> = nums(l, &v, 2)?;
        let (l, v) = next("pupil")?;
        let p: Vec<f64> = nums(l, &v, 3)?;
        let (l, v) = next("iris")?;
        let ir: Vec<f64> = nums(l, &v, 3)?;
        let mut lid = |key: &str| -> Result<Option<LineSeg>> {
            let (l, v) = next(key)?;
            if v == ["none"] {
                return Ok(None);
            }
            let f: Vec<f64> = nums(l, &v[..2.min(v.len())], 2)?;
            let votes: Vec<u32> = nums(l, &v[2.min(v.len())..], 1)?;
            Ok(Some(LineSeg {
                rho: f[0],
                theta: f[1],
                votes: votes[0],
            }))
        };
        let upper_eyelid = lid("upper_eyelid")?;
        let lower_eyelid = lid("lower_eyelid")?;
        let (l, v) = next("mask_rle")?;
        let count: usize = nums(l, &v[..1.min(v.len())], 1)?[0];
        let runs: Vec<usize> = nums(l, &v[1..], count)?;
        let noise_mask = Mask::from_runs(size[0], size[1], &runs).map_err(|e| IrisError::Parse {
            line: l,
            msg: e.to_string(),
        })?;
        Ok(IrisSegmentation {
            pupil: Circle::new(p[0], p[1], p[2]),
            iris: Circle::new(ir[0], ir[1], ir[2]),
            noise_mask,
            upper_eyelid,
            lower_eyelid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eyelash_mask_thresholds() {
        let white = GrayImage::filled(10, 10, 255).unwrap();
        assert_eq!(eyelash_mask(&white, 40).count(), 0);
        let black = GrayImage::filled(10, 10, 0).unwrap();
        assert_eq!(eyelash_mask(&black, 40).count(), 100);
        assert_eq!(eyelash_mask(&black, 0).count(), 0);
    }

    #[test]
    fn eyelash_mask_counts_dark_pixels() {
        let img = GrayImage::from_fn(23, 17, |x, y| ((x * 37 + y * 91) % 256) as u8).unwrap();
        let k = img.pixels().iter().filter(|&&p| p < 40).count();
        assert_eq!(eyelash_mask(&img, 40).count(), k);
        assert_eq!(eyelash_mask(&img, 255).count(), img.pixels().iter().filter(|&&p| p < 255).count());
    }

    #[test]
    fn blank_image_fails_at_pupil() {
        let img = GrayImage::filled(160, 140, 200).unwrap();
        match segment_iris(&img, &SegmentationConfig::default()) {
            Err(IrisError::SegmentationFailed { stage, .. }) => assert_eq!(stage, SegmentationStage::Pupil),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn record_round_trip() {
        let img = GrayImage::from_fn(30, 20, |x, y| ((x * y) % 256) as u8).unwrap();
        let seg = IrisSegmentation {
            pupil: Circle::new(15.0, 10.0, 3.0),
            iris: Circle::new(15.5, 10.0, 8.25),
            noise_mask: eyelash_mask(&img, 60),
            upper_eyelid: Some(LineSeg {
                rho: 4.0,
                theta: std::f64::consts::FRAC_PI_2,
                votes: 31,
            }),
            lower_eyelid: None,
        };
        let text = seg.to_record();
        assert_eq!(IrisSegmentation::from_record(&text).unwrap(), seg);
    }

    #[test]
    fn record_rejects_garbage() {
        assert!(IrisSegmentation::from_record("IRIS-SEGMENTATION 1\nsize 2 x\n").is_err());
        assert!(IrisSegmentation::from_record("").is_err());
    }

    proptest! {
        #[test]
        fn mask_rle_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let cells: Vec<bool> = (0..w * h).map(|i| (seed.rotate_left(i as u32 % 64) >> 3) & 1 == 1).collect();
            let m = Mask::new(w, h, cells).unwrap();
            prop_assert_eq!(Mask::from_runs(w, h, &m.to_runs()).unwrap(), m);
        }
    }
}

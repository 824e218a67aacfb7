//! Rubber-sheet unwrapping of the iris annulus onto a fixed polar grid.
//!
//! Row `i` maps to `r = i / (radial_res - 1)` and column `j` to
//! `theta = 2 pi j / angular_res`. Angles start on the positive x axis and
//! advance towards positive y in raster coordinates (y down). A grid cell
//! samples the image at the point `(1 - r) * pupil(theta) + r * limbus(theta)`.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{IrisError, Result};
use crate::exec;
use crate::image::{GrayImage, Mask};
use crate::preprocess::{Circle, IrisSegmentation};

pub const DEFAULT_RADIAL_RES: usize = 20;
pub const DEFAULT_ANGULAR_RES: usize = 240;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Pupil,
    Iris,
}

/// Point on a circle at angle `theta`.
#[inline]
pub fn circle_point(c: &Circle, theta: f64) -> (f64, f64) {
    (c.cx + c.r * theta.cos(), c.cy + c.r * theta.sin())
}

pub fn boundary_point(seg: &IrisSegmentation, which: Boundary, theta: f64) -> (f64, f64) {
    match which {
        Boundary::Pupil => circle_point(&seg.pupil, theta),
        Boundary::Iris => circle_point(&seg.iris, theta),
    }
}

/// Cartesian sample point of polar cell `(r, theta)`.
#[inline]
pub fn sample_point(pupil: &Circle, iris: &Circle, r: f64, theta: f64) -> (f64, f64) {
    let (xp, yp) = circle_point(pupil, theta);
    let (xi, yi) = circle_point(iris, theta);
    ((1.0 - r) * xp + r * xi, (1.0 - r) * yp + r * yi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedIris {
    pub radial_res: usize,
    pub angular_res: usize,
    /// Row-major intensities in `[0, 255]`; occluded cells hold 0.
    pub texture: Vec<f64>,
    pub valid: Vec<bool>,
}

impl NormalizedIris {
    pub fn new(radial_res: usize, angular_res: usize, texture: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let n = radial_res * angular_res;
        if texture.len() != n || valid.len() != n {
            return Err(IrisError::dim(format!(
                "texture/valid lengths {}/{} do not match {radial_res}x{angular_res}",
                texture.len(),
                valid.len()
            )));
        }
        Ok(NormalizedIris {
            radial_res,
            angular_res,
            texture,
            valid,
        })
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.texture[row * self.angular_res + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.texture[row * self.angular_res..(row + 1) * self.angular_res]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Texture rounded to 8 bits.
    pub fn to_image(&self) -> GrayImage {
        let px = self
            .texture
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::new(self.angular_res, self.radial_res, px).expect("non-empty grid")
    }

    /// 255 on valid cells, 0 on invalid ones.
    pub fn mask_image(&self) -> GrayImage {
        Mask::new(self.angular_res, self.radial_res, self.valid.clone())
            .expect("non-empty grid")
            .to_image()
    }

    /// Writes `<stem>.pgm` (texture) and `<stem>_mask.pgm` (validity).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.to_image().save(dir.join(format!("{stem}.pgm")))?;
        self.mask_image().save(dir.join(format!("{stem}_mask.pgm")))
    }

    /// One CSV line per row; invalid cells are written empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.radial_res {
            let cells: Vec<String> = (0..self.angular_res)
                .map(|j| {
                    let k = i * self.angular_res + j;
                    if self.valid[k] {
                        format!("{}", self.texture[k])
                    } else {
                        String::new()
                    }
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Unwraps the annulus between `seg.pupil` and `seg.iris` onto a
/// `radial_res x angular_res` grid with bilinear sampling.
pub fn rubber_sheet(
    img: &GrayImage,
    seg: &IrisSegmentation,
    radial_res: usize,
    angular_res: usize,
) -> Result<NormalizedIris> {
    if radial_res < 2 || angular_res < 4 {
        return Err(IrisError::dim(format!(
            "polar grid must be at least 2x4, got {radial_res}x{angular_res}"
        )));
    }
    let mask = &seg.noise_mask;
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(IrisError::dim("noise mask does not match image size"));
    }
    let thetas: Vec<f64> = (0..angular_res)
        .map(|j| 2.0 * PI * j as f64 / angular_res as f64)
        .collect();
    let rows = exec::map_range(0..radial_res, |i| {
        let r = i as f64 / (radial_res - 1) as f64;
        let mut tex = Vec::with_capacity(angular_res);
        let mut ok = Vec::with_capacity(angular_res);
        for &theta in &thetas {
            let (x, y) = sample_point(&seg.pupil, &seg.iris, r, theta);
            let sample = img.sample_bilinear(x, y).filter(|_| {
                let (nx, ny) = (x.round() as usize, y.round() as usize);
                !mask.get(nx, ny)
            });
            match sample {
                Some(v) => {
                    tex.push(v);
                    ok.push(true);
                }
                None => {
                    tex.push(0.0);
                    ok.push(false);
                }
            }
        }
        (tex, ok)
    });
    let mut texture = Vec::with_capacity(radial_res * angular_res);
    let mut valid = Vec::with_capacity(radial_res * angular_res);
    for (t, v) in rows {
        texture.extend(t);
        valid.extend(v);
    }
    NormalizedIris::new(radial_res, angular_res, texture, valid)
}

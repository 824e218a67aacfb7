//! 8-bit grayscale rasters, boolean masks and binary PGM (P5) I/O.

use std::fs;
use std::path::Path;

use crate::error::{IrisError, Result};

/// Row-major 8-bit single-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(IrisError::dim(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(IrisError::dim(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Bilinear sample at sub-pixel `(x, y)`; `None` outside `[0, w-1] x [0, h-1]`.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y) {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let p00 = self.get(x0, y0) as f64;
        let p10 = self.get(x1, y0) as f64;
        let p01 = self.get(x0, y1) as f64;
        let p11 = self.get(x1, y1) as f64;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        Some(top + (bottom - top) * fy)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments
            while cursor < bytes.len() {
                let b = bytes[cursor];
                if b == b'#' {
                    while cursor < bytes.len() && bytes[cursor] != b'\n' {
                        cursor += 1;
                    }
                } else if b.is_ascii_whitespace() {
                    cursor += 1;
                } else {
                    break;
                }
            }
            let start = cursor;
            while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
                cursor += 1;
            }
            if start == cursor {
                return Err(IrisError::Parse {
                    line: 1,
                    msg: "truncated PGM header".into(),
                });
            }
            fields.push(String::from_utf8_lossy(&bytes[start..cursor]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(IrisError::Parse {
                line: 1,
                msg: format!("expected binary PGM magic P5, found {}", fields[0]),
            });
        }
        let parse = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| IrisError::Parse {
                line: 1,
                msg: format!("bad PGM {what}: {s}"),
            })
        };
        let width = parse(&fields[1], "width")?;
        let height = parse(&fields[2], "height")?;
        let maxval = parse(&fields[3], "maxval")?;
        if maxval == 0 || maxval > 255 {
            return Err(IrisError::Parse {
                line: 1,
                msg: format!("unsupported PGM maxval {maxval}"),
            });
        }
        // exactly one whitespace byte separates the header from the raster
        cursor += 1;
        let n = width * height;
        if bytes.len() < cursor + n {
            return Err(IrisError::Parse {
                line: 1,
                msg: format!("PGM raster truncated: need {n} bytes"),
            });
        }
        let mut pixels = bytes[cursor..cursor + n].to_vec();
        if maxval != 255 {
            for p in &mut pixels {
                *p = ((*p as u32 * 255 + maxval as u32 / 2) / maxval as u32).min(255) as u8;
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(IrisError::MissingFile(path.to_path_buf()));
        }
        let bytes = fs::read(path).map_err(|e| IrisError::io(path, e))?;
        Self::from_pgm_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm_bytes()).map_err(|e| IrisError::io(path, e))
    }
}

/// Boolean raster with the same layout as [`GrayImage`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(IrisError::dim(format!(
                "{} mask cells for {width}x{height}",
                cells.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            cells,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.cells[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn union_with(&mut self, other: &Mask) {
        for (a, &b) in self.cells.iter_mut().zip(&other.cells) {
            *a |= b;
        }
    }

    /// Run lengths alternating false/true, starting with a (possibly empty) false run.
    pub fn to_runs(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0usize;
        for &c in &self.cells {
            if c == current {
                len += 1;
            } else {
                runs.push(len);
                current = c;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_runs(width: usize, height: usize, runs: &[usize]) -> Result<Self> {
        let mut cells = Vec::with_capacity(width * height);
        let mut value = false;
        for &r in runs {
            cells.extend(std::iter::repeat_n(value, r));
            value = !value;
        }
        Self::new(width, height, cells)
    }

    /// 255 where set, 0 elsewhere.
    pub fn to_image(&self) -> GrayImage {
        let pixels = self.cells.iter().map(|&c| if c { 255 } else { 0 }).collect();
        GrayImage::new(self.width, self.height, pixels).expect("mask dimensions are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage::from_fn(7, 5, |x, y| (x * 31 + y * 7) as u8).unwrap();
        let back = GrayImage::from_pgm_bytes(&img.to_pgm_bytes()).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn pgm_header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20]);
        let img = GrayImage::from_pgm_bytes(&bytes).unwrap();
        assert_eq!(img.pixels(), &[10, 20]);
    }

    #[test]
    fn pgm_rejects_ascii_variant() {
        assert!(GrayImage::from_pgm_bytes(b"P2\n1 1\n255\n0\n").is_err());
    }

    #[test]
    fn bilinear_hits_pixel_centers_and_midpoints() {
        let img = GrayImage::new(2, 2, vec![0, 100, 50, 150]).unwrap();
        assert_eq!(img.sample_bilinear(0.0, 0.0), Some(0.0));
        assert_eq!(img.sample_bilinear(1.0, 1.0), Some(150.0));
        assert_eq!(img.sample_bilinear(0.5, 0.5), Some(75.0));
        assert_eq!(img.sample_bilinear(1.01, 0.0), None);
        assert_eq!(img.sample_bilinear(-0.01, 0.0), None);
    }

    #[test]
    fn mask_runs_round_trip() {
        let cells = vec![true, true, false, true, false, false];
        let m = Mask::new(3, 2, cells).unwrap();
        assert_eq!(m.to_runs(), vec![0, 2, 1, 1, 2]);
        assert_eq!(Mask::from_runs(3, 2, &m.to_runs()).unwrap(), m);
    }
}

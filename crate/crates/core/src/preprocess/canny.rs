//! Canny edge detection: Gaussian smoothing, Sobel gradients, non-maximum
//! suppression and hysteresis.

use std::collections::VecDeque;

use crate::error::{IrisError, Result};
use crate::image::{GrayImage, Mask};

/// Binary edge raster, same dimensions as the source image.
pub type EdgeMap = Mask;

/// Canny parameters with thresholds expressed as fractions of the maximum
/// gradient magnitude of the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    pub low_ratio: f64,
    pub high_ratio: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 2.0,
            low_ratio: 0.1,
            high_ratio: 0.3,
        }
    }
}

/// Smoothed-image Sobel gradient field.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl Gradient {
    pub fn max_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

#[inline]
fn clamp_idx(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let src: Vec<f64> = img.pixels().iter().map(|&p| p as f64).collect();

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                acc += kv * row[clamp_idx(x as isize + ki as isize - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                acc += kv * tmp[clamp_idx(y as isize + ki as isize - radius, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Sobel gradients of the Gaussian-smoothed image.
pub fn smoothed_gradient(img: &GrayImage, sigma: f64) -> Gradient {
    let (w, h) = (img.width(), img.height());
    let s = gaussian_smooth(img, sigma);
    let at = |x: isize, y: isize| s[clamp_idx(y, h) * w + clamp_idx(x, w)];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut magnitude = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            gx[i] = dx;
            gy[i] = dy;
            magnitude[i] = dx.hypot(dy);
        }
    }
    Gradient {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
    }
}

fn check_image(img: &GrayImage) -> Result<()> {
    if img.width() < 3 || img.height() < 3 {
        return Err(IrisError::dim(format!(
            "edge detection needs at least 3x3 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Canny edges with absolute gradient thresholds.
pub fn canny_edges(img: &GrayImage, low: f64, high: f64, sigma: f64) -> Result<EdgeMap> {
    check_image(img)?;
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(IrisError::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    if !(0.0 <= low && low <= high) {
        return Err(IrisError::InvalidArgument(format!(
            "thresholds must satisfy 0 <= low <= high, got {low}, {high}"
        )));
    }
    let grad = smoothed_gradient(img, sigma);
    Ok(edges_from_gradient(&grad, low, high))
}

/// Canny edges with thresholds relative to the image's maximum gradient.
pub fn canny_relative(img: &GrayImage, params: &CannyParams) -> Result<EdgeMap> {
    check_image(img)?;
    if params.sigma.is_nan() || params.sigma <= 0.0 {
        return Err(IrisError::InvalidArgument(format!(
            "sigma must be > 0, got {}",
            params.sigma
        )));
    }
    if !(0.0 <= params.low_ratio && params.low_ratio <= params.high_ratio) {
        return Err(IrisError::InvalidArgument(
            "threshold ratios must satisfy 0 <= low <= high".into(),
        ));
    }
    let grad = smoothed_gradient(img, params.sigma);
    let max = grad.max_magnitude();
    Ok(edges_from_gradient(
        &grad,
        params.low_ratio * max,
        params.high_ratio * max,
    ))
}

fn edges_from_gradient(grad: &Gradient, low: f64, high: f64) -> EdgeMap {
    let thin = non_maximum_suppression(grad);
    hysteresis(grad.width, grad.height, &thin, low, high)
}

/// Keeps a pixel when its magnitude is >= the neighbor behind it and strictly
/// greater than the neighbor ahead of it along the gradient direction. The
/// asymmetric comparison keeps exactly one pixel of a two-pixel plateau.
fn non_maximum_suppression(grad: &Gradient) -> Vec<f64> {
    let (w, h) = (grad.width, grad.height);
    let mag = &grad.magnitude;
    let mut out = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let mut angle = grad.gy[i].atan2(grad.gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            // (dx, dy) of the neighbor ahead along the gradient
            let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let ahead = mag[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
            let behind = mag[(y as isize - dy) as usize * w + (x as isize - dx) as usize];
            if m >= behind && m > ahead {
                out[i] = m;
            }
        }
    }
    out
}

fn hysteresis(w: usize, h: usize, thin: &[f64], low: f64, high: f64) -> EdgeMap {
    let mut edges = Mask::empty(w, h);
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m > 0.0 && m >= high {
            edges.set(i % w, i / w, true);
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                let j = ny * w + nx;
                if !edges.get(nx, ny) && thin[j] > 0.0 && thin[j] >= low {
                    edges.set(nx, ny, true);
                    queue.push_back(j);
                }
            }
        }
    }
    edges
}

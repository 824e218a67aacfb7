//! Synthetic eye images with known geometry and per-subject iris texture.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{IrisError, Result};
use crate::image::GrayImage;

use super::manifest::{DatasetManifest, ManifestEntry, Source};

pub const PUPIL_LEVEL: f64 = 45.0;
pub const SCLERA_LEVEL: f64 = 220.0;
pub const EYELID_LEVEL: f64 = 85.0;
pub const IRIS_MEAN: f64 = 140.0;
/// Sum of texture component amplitudes; iris intensities stay in `IRIS_MEAN +- IRIS_SPAN`.
pub const IRIS_SPAN: f64 = 30.0;

const TEXTURE_SALT: u64 = 0x1415_9265_3589_7932;

/// Band-limited polar texture: a sum of a few low-frequency cosines in
/// normalized radius and angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTexture {
    components: Vec<(f64, f64, f64, f64)>, // amplitude, angular cycles, radial frequency, phase
}

impl ClassTexture {
    /// Texture for a subject; depends only on the class id.
    pub fn for_class(class_id: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(TEXTURE_SALT ^ u64::from(class_id).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let k = 10;
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let components = raw
            .iter()
            .map(|a| {
                (
                    a * IRIS_SPAN / total,
                    rng.random_range(1..=10) as f64,
                    rng.random_range(0.0..3.0),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        ClassTexture { components }
    }

    /// Flat texture at `level`.
    pub fn flat() -> Self {
        ClassTexture { components: Vec::new() }
    }

    /// Intensity at normalized radius `rho` in `[0, 1]` and angle `theta`.
    pub fn value(&self, rho: f64, theta: f64) -> f64 {
        IRIS_MEAN
            + self
                .components
                .iter()
                .map(|&(a, m, n, phi)| a * (m * theta + PI * n * rho + phi).cos())
                .sum::<f64>()
    }
}

/// Geometry and acquisition variation of one rendered eye.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeParams {
    pub width: usize,
    pub height: usize,
    pub cx: f64,
    pub cy: f64,
    pub pupil_r: f64,
    pub iris_r: f64,
    /// Texture rotation in radians (raster angle convention).
    pub rotation: f64,
    /// Rows above this y are covered by the upper eyelid.
    pub eyelid_y: Option<f64>,
    pub noise_sigma: f64,
}

/// Rasterizes an eye: dark pupil disk, textured annulus, bright sclera and an
/// optional eyelid band, plus Gaussian pixel noise.
pub fn render_eye(p: &EyeParams, texture: &ClassTexture, rng: &mut ChaCha8Rng) -> Result<GrayImage> {
    let noise = Normal::new(0.0, p.noise_sigma.max(0.0)).map_err(|e| IrisError::InvalidArgument(e.to_string()))?;
    GrayImage::from_fn(p.width, p.height, |x, y| {
        let dx = x as f64 - p.cx;
        let dy = y as f64 - p.cy;
        let d = dx.hypot(dy);
        let mut v = if d < p.pupil_r {
            PUPIL_LEVEL
        } else if d <= p.iris_r {
            let rho = (d - p.pupil_r) / (p.iris_r - p.pupil_r);
            texture.value(rho, dy.atan2(dx) - p.rotation)
        } else {
            SCLERA_LEVEL
        };
        if p.eyelid_y.is_some_and(|ly| (y as f64) < ly) {
            v = EYELID_LEVEL;
        }
        if p.noise_sigma > 0.0 {
            v += noise.sample(rng);
        }
        v.round().clamp(0.0, 255.0) as u8
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub eyelid_probability: f64,
    pub noise_sigma: f64,
    pub max_rotation_deg: f64,
}

impl SynthConfig {
    pub fn new(classes: usize, per_class: usize, seed: u64) -> Self {
        SynthConfig {
            classes,
            per_class,
            seed,
            width: 320,
            height: 280,
            eyelid_probability: 0.2,
            noise_sigma: 3.0,
            max_rotation_deg: 3.0,
        }
    }
}

/// Per-image geometry drawn from the generator stream.
pub fn draw_params(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> EyeParams {
    let cx = cfg.width as f64 / 2.0 + rng.random_range(-4.0..=4.0);
    let cy = cfg.height as f64 / 2.0 + rng.random_range(-4.0..=4.0);
    let pupil_r = 32.0 + rng.random_range(-4.0..=4.0);
    let iris_r = 100.0 + rng.random_range(-5.0..=5.0);
    let rotation = rng.random_range(-cfg.max_rotation_deg..=cfg.max_rotation_deg).to_radians();
    let lid_draw: f64 = rng.random_range(0.0..1.0);
    let lid_depth = rng.random_range(0.5..0.75);
    let eyelid_y = (lid_draw < cfg.eyelid_probability).then_some(cy - iris_r * lid_depth);
    EyeParams {
        width: cfg.width,
        height: cfg.height,
        cx,
        cy,
        pupil_r,
        iris_r,
        rotation,
        eyelid_y,
        noise_sigma: cfg.noise_sigma,
    }
}

/// Writes `classes x per_class` PGM eyes plus `manifest.csv` into `out_dir`.
pub fn generate_synthetic(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    if cfg.classes < 2 || cfg.per_class < 2 {
        return Err(IrisError::InvalidArgument(format!(
            "need at least 2 classes and 2 images per class, got {} x {}",
            cfg.classes, cfg.per_class
        )));
    }
    if cfg.classes > u32::MAX as usize {
        return Err(IrisError::InvalidArgument("too many classes".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| IrisError::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut entries = Vec::with_capacity(cfg.classes * cfg.per_class);
    for class in 0..cfg.classes as u32 {
        let texture = ClassTexture::for_class(class);
        for k in 0..cfg.per_class {
            let params = draw_params(cfg, &mut rng);
            let img = render_eye(&params, &texture, &mut rng)?;
            let name = format!("s{class:03}_{k:02}.pgm");
            img.save(out_dir.join(&name))?;
            entries.push(ManifestEntry {
                path: out_dir.join(&name),
                subject: class,
            });
        }
    }
    let manifest = DatasetManifest {
        entries,
        source: Source::Synthetic,
    };
    manifest.write(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_depends_only_on_class() {
        assert_eq!(ClassTexture::for_class(3), ClassTexture::for_class(3));
        assert_ne!(ClassTexture::for_class(3), ClassTexture::for_class(4));
        let t = ClassTexture::for_class(9);
        for i in 0..50 {
            let v = t.value(i as f64 / 49.0, i as f64 * 0.37);
            assert!((IRIS_MEAN - IRIS_SPAN - 1e-9..=IRIS_MEAN + IRIS_SPAN + 1e-9).contains(&v));
        }
    }

    #[test]
    fn rejects_degenerate_requests() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_synthetic(&SynthConfig::new(1, 5, 0), dir.path()).is_err());
        assert!(generate_synthetic(&SynthConfig::new(3, 1, 0), dir.path()).is_err());
    }

    #[test]
    fn render_regions() {
        let p = EyeParams {
            width: 120,
            height: 120,
            cx: 60.0,
            cy: 60.0,
            pupil_r: 15.0,
            iris_r: 40.0,
            rotation: 0.0,
            eyelid_y: Some(10.0),
            noise_sigma: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = render_eye(&p, &ClassTexture::flat(), &mut rng).unwrap();
        assert_eq!(img.get(60, 60), PUPIL_LEVEL as u8);
        assert_eq!(img.get(60 + 30, 60), IRIS_MEAN as u8);
        assert_eq!(img.get(115, 115), SCLERA_LEVEL as u8);
        assert_eq!(img.get(60, 5), EYELID_LEVEL as u8);
    }
}

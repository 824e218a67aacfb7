//! Two-level Haar decomposition of the normalized iris; the level-2
//! approximation band is the feature vector.

use crate::error::{IrisError, Result};
use crate::normalize::NormalizedIris;

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(IrisError::dim(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// The four half-size quadrants of one Haar step.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarBands {
    pub ll: Matrix,
    pub lh: Matrix,
    pub hl: Matrix,
    pub hh: Matrix,
}

/// One averaging Haar step. For each 2x2 block `[[a, b], [c, d]]`:
/// `LL = (a+b+c+d)/4`, `LH = (a-b+c-d)/4`, `HL = (a+b-c-d)/4`, `HH = (a-b-c+d)/4`.
pub fn haar_level(m: &Matrix) -> Result<HaarBands> {
    if !m.rows.is_multiple_of(2) || !m.cols.is_multiple_of(2) {
        return Err(IrisError::OddDimension {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let (hr, hc) = (m.rows / 2, m.cols / 2);
    let mut ll = Vec::with_capacity(hr * hc);
    let mut lh = Vec::with_capacity(hr * hc);
    let mut hl = Vec::with_capacity(hr * hc);
    let mut hh = Vec::with_capacity(hr * hc);
    for i in 0..hr {
        for j in 0..hc {
            let a = m.at(2 * i, 2 * j);
            let b = m.at(2 * i, 2 * j + 1);
            let c = m.at(2 * i + 1, 2 * j);
            let d = m.at(2 * i + 1, 2 * j + 1);
            ll.push((a + b + c + d) / 4.0);
            lh.push((a - b + c - d) / 4.0);
            hl.push((a + b - c - d) / 4.0);
            hh.push((a - b - c + d) / 4.0);
        }
    }
    Ok(HaarBands {
        ll: Matrix::new(hr, hc, ll)?,
        lh: Matrix::new(hr, hc, lh)?,
        hl: Matrix::new(hr, hc, hl)?,
        hh: Matrix::new(hr, hc, hh)?,
    })
}

/// Inverse of [`haar_level`].
pub fn haar_inverse(bands: &HaarBands) -> Result<Matrix> {
    let (hr, hc) = (bands.ll.rows, bands.ll.cols);
    for b in [&bands.lh, &bands.hl, &bands.hh] {
        if b.rows != hr || b.cols != hc {
            return Err(IrisError::dim("Haar bands differ in size"));
        }
    }
    let mut out = Matrix::filled(hr * 2, hc * 2, 0.0);
    let w = hc * 2;
    for i in 0..hr {
        for j in 0..hc {
            let (ll, lh, hl, hh) = (bands.ll.at(i, j), bands.lh.at(i, j), bands.hl.at(i, j), bands.hh.at(i, j));
            out.data[2 * i * w + 2 * j] = ll + lh + hl + hh;
            out.data[2 * i * w + 2 * j + 1] = ll - lh + hl - hh;
            out.data[(2 * i + 1) * w + 2 * j] = ll + lh - hl - hh;
            out.data[(2 * i + 1) * w + 2 * j + 1] = ll - lh - hl + hh;
        }
    }
    Ok(out)
}

/// Flattened LL2 coefficients, optionally labelled with a subject id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub subject: Option<u32>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `subject_id,v0,v1,...`; unlabelled vectors write an empty id.
    pub fn to_csv_row(&self) -> String {
        let mut s = self.subject.map(|id| id.to_string()).unwrap_or_default();
        for v in &self.values {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s
    }

    pub fn from_csv_row(line: &str, line_no: usize) -> Result<Self> {
        let mut parts = line.split(',');
        let id = parts.next().unwrap_or("").trim();
        let subject = if id.is_empty() {
            None
        } else {
            Some(id.parse::<u32>().map_err(|_| IrisError::Parse {
                line: line_no,
                msg: format!("bad subject id `{id}`"),
            })?)
        };
        let values = parts
            .map(|p| {
                let v = p.trim().parse::<f64>().map_err(|_| IrisError::Parse {
                    line: line_no,
                    msg: format!("bad feature value `{p}`"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(IrisError::Parse {
                        line: line_no,
                        msg: "non-finite feature value".into(),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(FeatureVector { values, subject })
    }
}

/// Replaces invalid cells with the mean of the valid ones.
pub fn infill_masked(norm: &NormalizedIris) -> Result<Matrix> {
    let (sum, count) = norm
        .texture
        .iter()
        .zip(&norm.valid)
        .filter(|(_, &ok)| ok)
        .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
    if count == 0 {
        return Err(IrisError::AllMasked);
    }
    let mean = sum / count as f64;
    let data = norm
        .texture
        .iter()
        .zip(&norm.valid)
        .map(|(&v, &ok)| if ok { v } else { mean })
        .collect();
    Matrix::new(norm.radial_res, norm.angular_res, data)
}

/// Infill, two Haar levels, keep LL2 row-major.
pub fn extract_features(norm: &NormalizedIris) -> Result<FeatureVector> {
    if !norm.radial_res.is_multiple_of(4) || !norm.angular_res.is_multiple_of(4) {
        return Err(IrisError::dim(format!(
            "grid {}x{} is not divisible by 4",
            norm.radial_res, norm.angular_res
        )));
    }
    let m = infill_masked(norm)?;
    let level1 = haar_level(&m)?;
    let level2 = haar_level(&level1.ll)?;
    Ok(FeatureVector {
        values: level2.ll.data,
        subject: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_norm(rows: usize, cols: usize, seed: u64) -> NormalizedIris {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tex = (0..rows * cols).map(|_| rng.random_range(0.0..255.0)).collect();
        NormalizedIris::new(rows, cols, tex, vec![true; rows * cols]).unwrap()
    }

    #[test]
    fn constant_matrix_has_only_ll() {
        let b = haar_level(&Matrix::filled(4, 6, 3.5)).unwrap();
        assert!(b.ll.data.iter().all(|&v| v == 3.5));
        for band in [&b.lh, &b.hl, &b.hh] {
            assert!(band.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_block_values() {
        let b = haar_level(&Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        assert_eq!(b.ll.data, vec![2.5]);
        assert_eq!(b.lh.data, vec![-0.5]);
        assert_eq!(b.hl.data, vec![-1.0]);
        assert_eq!(b.hh.data, vec![0.0]);
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(matches!(
            haar_level(&Matrix::filled(3, 4, 0.0)),
            Err(IrisError::OddDimension { rows: 3, cols: 4 })
        ));
    }

    #[test]
    fn perfect_reconstruction() {
        let n = random_norm(20, 240, 1);
        let m = Matrix::new(20, 240, n.texture.clone()).unwrap();
        let back = haar_inverse(&haar_level(&m).unwrap()).unwrap();
        for (a, b) in m.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_texture_features() {
        let n = NormalizedIris::new(20, 240, vec![42.0; 4800], vec![true; 4800]).unwrap();
        let f = extract_features(&n).unwrap();
        assert_eq!(f.len(), 300);
        assert!(f.values.iter().all(|&v| v == 42.0));
    }

    #[test]
    fn all_masked_is_an_error() {
        let n = NormalizedIris::new(20, 240, vec![0.0; 4800], vec![false; 4800]).unwrap();
        assert!(matches!(extract_features(&n), Err(IrisError::AllMasked)));
    }

    #[test]
    fn infill_uses_valid_mean() {
        let n = NormalizedIris::new(4, 4, (0..16).map(|v| v as f64).collect(), (0..16).map(|i| i % 2 == 0).collect()).unwrap();
        let m = infill_masked(&n).unwrap();
        // valid values 0,2,...,14 -> mean 7
        assert_eq!(m.at(0, 1), 7.0);
        assert_eq!(m.at(0, 2), 2.0);
    }

    #[test]
    fn feature_count_tracks_grid() {
        for (r, c) in [(8, 16), (20, 240), (12, 480)] {
            let f = extract_features(&random_norm(r, c, 9)).unwrap();
            assert_eq!(f.len(), (r / 4) * (c / 4));
        }
        assert!(extract_features(&random_norm(10, 240, 1)).is_err());
    }

    #[test]
    fn angular_shift_by_four_columns_shifts_features_by_one() {
        let n = random_norm(20, 240, 3);
        let mut shifted = n.clone();
        for i in 0..20 {
            for j in 0..240 {
                shifted.texture[i * 240 + (j + 4) % 240] = n.texture[i * 240 + j];
            }
        }
        let a = extract_features(&n).unwrap();
        let b = extract_features(&shifted).unwrap();
        for i in 0..5 {
            for j in 0..60 {
                assert_eq!(b.values[i * 60 + (j + 1) % 60], a.values[i * 60 + j]);
            }
        }
    }

    #[test]
    fn csv_row_round_trip() {
        let f = FeatureVector {
            values: vec![0.1, 1e-300, -3.25, 255.0],
            subject: Some(12),
        };
        let back = FeatureVector::from_csv_row(&f.to_csv_row(), 1).unwrap();
        assert_eq!(back, f);
        assert!(FeatureVector::from_csv_row("x,1.0", 3).is_err());
        assert!(FeatureVector::from_csv_row("1,NaN", 3).is_err());
    }
}

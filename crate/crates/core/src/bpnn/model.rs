use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IrisError, Result};

/// Per-input min-max rescaling to `[0, 1]`, fitted on training features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaling {
    /// Maps every input to itself.
    pub fn identity(n: usize) -> Self {
        FeatureScaling {
            min: vec![0.0; n],
            max: vec![1.0; n],
        }
    }

    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, n: usize) -> Result<Self> {
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        let mut seen = 0usize;
        for row in rows {
            if row.len() != n {
                return Err(IrisError::dim(format!("feature row has {} values, expected {n}", row.len())));
            }
            for (k, &v) in row.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
            seen += 1;
        }
        if seen == 0 {
            return Err(IrisError::EmptyDataset);
        }
        Ok(FeatureScaling { min, max })
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

/// Three-layer network: `n` inputs, `h` hidden, `o` outputs, sigmoid units.
///
/// `w1[i * n + k]` is the weight from input `k` to hidden neuron `i`;
/// `w2[j * h + i]` from hidden `i` to output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BpnnModel {
    pub n: usize,
    pub h: usize,
    pub o: usize,
    pub use_bias: bool,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub scaling: FeatureScaling,
    /// Enrolled class ids, ascending. Empty means every `o`-bit code is enrolled.
    pub classes: Vec<u32>,
}

impl BpnnModel {
    pub fn zeros(n: usize, h: usize, o: usize) -> Result<Self> {
        if n == 0 || h == 0 || o == 0 {
            return Err(IrisError::dim(format!("layer sizes must be positive, got {n}-{h}-{o}")));
        }
        if o > 31 {
            return Err(IrisError::dim(format!("at most 31 output bits supported, got {o}")));
        }
        Ok(BpnnModel {
            n,
            h,
            o,
            use_bias: true,
            w1: vec![0.0; h * n],
            b1: vec![0.0; h],
            w2: vec![0.0; o * h],
            b2: vec![0.0; o],
            scaling: FeatureScaling::identity(n),
            classes: Vec::new(),
        })
    }

    /// Weights and biases uniform in `[-0.5, 0.5]`, drawn in the order
    /// W1, b1, W2, b2 from a ChaCha8 stream seeded with `seed`.
    pub fn random(n: usize, h: usize, o: usize, seed: u64, use_bias: bool) -> Result<Self> {
        let mut m = Self::zeros(n, h, o)?;
        m.use_bias = use_bias;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |v: &mut Vec<f64>| {
            for x in v.iter_mut() {
                *x = rng.random_range(-0.5..=0.5);
            }
        };
        draw(&mut m.w1);
        if use_bias {
            draw(&mut m.b1);
        }
        draw(&mut m.w2);
        if use_bias {
            draw(&mut m.b2);
        }
        Ok(m)
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.w1.len() == self.h * self.n
            && self.b1.len() == self.h
            && self.w2.len() == self.o * self.h
            && self.b2.len() == self.o
            && self.scaling.min.len() == self.n
            && self.scaling.max.len() == self.n;
        if !ok {
            return Err(IrisError::dim("model arrays do not match n, h, o"));
        }
        let all = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(IrisError::Range("model holds a non-finite weight".into()));
        }
        Ok(())
    }

    /// Enrolled class ids (every `o`-bit code when none were recorded).
    pub fn enrolled(&self) -> Vec<u32> {
        if self.classes.is_empty() {
            (0..1u32 << self.o).collect()
        } else {
            self.classes.clone()
        }
    }

    /// Plain-text model:
    ///
    /// ```text
    /// BPNN <n> <h> <o> <bias_flag>
    /// <n scaling minima>
    /// <n scaling maxima>
    /// <h lines of W1 rows, n values each>
    /// <b1: h values>
    /// <o lines of W2 rows, h values each>
    /// <b2: o values>
    /// CLASSES <ids...>            (optional)
    /// ```
    ///
    /// Values are space-separated with 17 significant digits.
    pub fn to_text(&self) -> String {
        fn row(s: &mut String, vals: &[f64]) {
            for (i, v) in vals.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{v:.16e}");
            }
            s.push('\n');
        }
        let mut s = format!("BPNN {} {} {} {}\n", self.n, self.h, self.o, u8::from(self.use_bias));
        row(&mut s, &self.scaling.min);
        row(&mut s, &self.scaling.max);
        for r in self.w1.chunks(self.n) {
            row(&mut s, r);
        }
        row(&mut s, &self.b1);
        for r in self.w2.chunks(self.h) {
            row(&mut s, r);
        }
        row(&mut s, &self.b2);
        if !self.classes.is_empty() {
            s.push_str("CLASSES");
            for c in &self.classes {
                let _ = write!(s, " {c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(IrisError::Parse {
            line: 1,
            msg: "empty model file".into(),
        })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "BPNN" {
            return Err(IrisError::Parse {
                line: 1,
                msg: "expected `BPNN n h o bias_flag`".into(),
            });
        }
        let dims: Vec<usize> = parts[1..]
            .iter()
            .map(|p| p.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| IrisError::Parse {
                line: 1,
                msg: "bad header number".into(),
            })?;
        let (n, h, o) = (dims[0], dims[1], dims[2]);
        let mut m = Self::zeros(n, h, o).map_err(|e| IrisError::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        m.use_bias = match dims[3] {
            0 => false,
            1 => true,
            other => {
                return Err(IrisError::Parse {
                    line: 1,
                    msg: format!("bias flag must be 0 or 1, got {other}"),
                })
            }
        };
        let mut read_row = |len: usize| -> Result<Vec<f64>> {
            let (i, line) = lines.next().ok_or(IrisError::Parse {
                line: 0,
                msg: "model file truncated".into(),
            })?;
            let vals = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| IrisError::Parse {
                        line: i + 1,
                        msg: format!("bad number `{t}`"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != len {
                return Err(IrisError::Parse {
                    line: i + 1,
                    msg: format!("expected {len} values, found {}", vals.len()),
                });
            }
            Ok(vals)
        };
        m.scaling.min = read_row(n)?;
        m.scaling.max = read_row(n)?;
        m.w1 = (0..h).map(|_| read_row(n)).collect::<Result<Vec<_>>>()?.concat();
        m.b1 = read_row(h)?;
        m.w2 = (0..o).map(|_| read_row(h)).collect::<Result<Vec<_>>>()?.concat();
        m.b2 = read_row(o)?;
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            match parts.next() {
                None => continue,
                Some("CLASSES") => {
                    m.classes = parts
                        .map(|t| {
                            t.parse::<u32>().map_err(|_| IrisError::Parse {
                                line: i + 1,
                                msg: format!("bad class id `{t}`"),
                            })
                        })
                        .collect::<Result<Vec<u32>>>()?;
                }
                Some(other) => {
                    return Err(IrisError::Parse {
                        line: i + 1,
                        msg: format!("unexpected `{other}`"),
                    })
                }
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| IrisError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IrisError::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Class id and its `o`-bit binary code, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCode {
    pub class_id: u32,
    pub bits: Vec<u8>,
}

impl LabelCode {
    pub fn targets(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

pub fn encode_label(class_id: u32, o: usize) -> Result<LabelCode> {
    if o == 0 || o > 31 || class_id >= (1u32 << o) {
        return Err(IrisError::Range(format!("class {class_id} does not fit in {o} bits")));
    }
    let bits = (0..o).rev().map(|b| ((class_id >> b) & 1) as u8).collect();
    Ok(LabelCode { class_id, bits })
}

pub fn decode_label(bits: &[u8]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b != 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_examples() {
        assert_eq!(encode_label(0, 7).unwrap().bits, vec![0; 7]);
        assert_eq!(encode_label(99, 7).unwrap().bits, vec![1, 1, 0, 0, 0, 1, 1]);
        assert!(matches!(encode_label(128, 7), Err(IrisError::Range(_))));
    }

    #[test]
    fn label_round_trip_all_seven_bit_codes() {
        for c in 0..128 {
            assert_eq!(decode_label(&encode_label(c, 7).unwrap().bits), c);
        }
    }

    #[test]
    fn random_weights_in_range_and_seeded() {
        let a = BpnnModel::random(30, 8, 3, 5, true).unwrap();
        let b = BpnnModel::random(30, 8, 3, 5, true).unwrap();
        assert_eq!(a, b);
        assert!(a.w1.iter().chain(&a.b2).all(|v| (-0.5..=0.5).contains(v)));
        let c = BpnnModel::random(30, 8, 3, 5, false).unwrap();
        assert!(c.b1.iter().chain(&c.b2).all(|&v| v == 0.0));
    }

    #[test]
    fn scaling_fit_and_apply() {
        let rows = [vec![0.0, 5.0, 2.0], vec![10.0, 5.0, 4.0]];
        let s = FeatureScaling::fit(rows.iter().map(|r| r.as_slice()), 3).unwrap();
        assert_eq!(s.apply(&[5.0, 5.0, 3.0]), vec![0.5, 0.0, 0.5]);
        assert_eq!(FeatureScaling::identity(2).apply(&[0.3, 7.0]), vec![0.3, 7.0]);
    }

    #[test]
    fn text_rejects_bad_header() {
        assert!(BpnnModel::from_text("BPNN 2 2\n").is_err());
        assert!(BpnnModel::from_text("").is_err());
        assert!(BpnnModel::from_text("BPNN 1 1 1 1\n0\n1\n0.5\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn text_round_trip_is_exact(n in 1usize..6, h in 1usize..5, o in 1usize..4, seed in any::<u64>(), bias in any::<bool>()) {
            let mut m = BpnnModel::random(n, h, o, seed, bias).unwrap();
            m.scaling.max = m.scaling.max.iter().map(|v| v * 1.0 / 3.0).collect();
            m.classes = vec![0, 1];
            let back = BpnnModel::from_text(&m.to_text()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}

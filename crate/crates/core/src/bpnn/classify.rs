use crate::error::{IrisError, Result};

use super::backend::forward;
use super::model::{decode_label, BpnnModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Predicted class, `None` when the nearest enrolled code is farther than
    /// the reject threshold.
    pub class_id: Option<u32>,
    /// Nearest enrolled class by Hamming distance (smallest id on ties).
    pub nearest: u32,
    pub distance: u32,
    /// Set when the rounded output code is not itself an enrolled class.
    pub nearest_match: bool,
    pub outputs: Vec<f64>,
}

/// Output bits rounded at 0.5, most significant first.
pub fn round_outputs(outputs: &[f64]) -> Vec<u8> {
    outputs.iter().map(|&y| u8::from(y >= 0.5)).collect()
}

/// Decodes rounded outputs against `enrolled` (ascending ids).
pub fn decode_outputs(outputs: Vec<f64>, enrolled: &[u32], reject_threshold: u32) -> Classification {
    let code = decode_label(&round_outputs(&outputs));
    if enrolled.binary_search(&code).is_ok() {
        return Classification {
            class_id: Some(code),
            nearest: code,
            distance: 0,
            nearest_match: false,
            outputs,
        };
    }
    let (nearest, distance) = enrolled
        .iter()
        .map(|&c| (c, (c ^ code).count_ones()))
        .min_by_key(|&(c, d)| (d, c))
        .unwrap_or((code, u32::MAX));
    Classification {
        class_id: (distance <= reject_threshold).then_some(nearest),
        nearest,
        distance,
        nearest_match: true,
        outputs,
    }
}

/// Classifies raw (unscaled) features with the model's stored scaling.
pub fn classify(model: &BpnnModel, features: &[f64], reject_threshold: u32) -> Result<Classification> {
    if features.len() != model.n {
        return Err(IrisError::dim(format!(
            "feature vector has {} values, model expects {}",
            features.len(),
            model.n
        )));
    }
    let scaled = model.scaling.apply(features);
    let outputs = forward(model, &scaled)?;
    let mut enrolled = model.enrolled();
    enrolled.sort_unstable();
    Ok(decode_outputs(outputs, &enrolled, reject_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpnn::model::encode_label;

    #[test]
    fn exact_code_is_direct_hit() {
        let target = encode_label(5, 7).unwrap().targets();
        let c = decode_outputs(target, &(0..100).collect::<Vec<_>>(), 7);
        assert_eq!(c.class_id, Some(5));
        assert_eq!(c.distance, 0);
        assert!(!c.nearest_match);
    }

    #[test]
    fn unenrolled_code_flags_nearest_match() {
        let c = decode_outputs(vec![0.9; 7], &(0..100).collect::<Vec<_>>(), 7);
        assert!(c.nearest_match);
        assert!(c.distance > 0);
        // 1111111 vs ids < 100: 95 = 1011111 and 63 = 0111111 are distance 1; smallest id wins
        assert_eq!(c.nearest, 63);
        assert_eq!(c.distance, 1);
    }

    #[test]
    fn reject_threshold_yields_unknown() {
        let c = decode_outputs(vec![0.9; 7], &[0], 3);
        assert_eq!(c.nearest, 0);
        assert_eq!(c.distance, 7);
        assert_eq!(c.class_id, None);
    }

    #[test]
    fn classify_checks_dimensions() {
        let m = BpnnModel::zeros(4, 2, 3).unwrap();
        assert!(matches!(classify(&m, &[0.0; 3], 3), Err(IrisError::Dimension(_))));
        // all outputs 0.5 round to 1 -> code 7
        let c = classify(&m, &[0.0; 4], 3).unwrap();
        assert_eq!(c.class_id, Some(7));
    }
}

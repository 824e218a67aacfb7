use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{IrisError, Result};

use super::manifest::{DatasetManifest, ManifestEntry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Per-subject split: each subject's images are shuffled with a stream
/// derived from the seed and subject id, then the first
/// `ceil(fraction * count)` go to training.
pub fn split(manifest: &DatasetManifest, spec: &SplitSpec) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(IrisError::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let mut groups: BTreeMap<u32, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in &manifest.entries {
        groups.entry(e.subject).or_default().push(e);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (subject, mut items) in groups {
        let count = items.len();
        let share = spec.train_fraction * count as f64;
        if share < 1.0 - 1e-9 {
            return Err(IrisError::TooFewImages { subject, count });
        }
        let k = ((share - 1e-9).ceil() as usize).min(count);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(u64::from(subject) + 1);
        items.shuffle(&mut rng);
        train.extend(items[..k].iter().map(|e| (*e).clone()));
        test.extend(items[k..].iter().map(|e| (*e).clone()));
    }
    Ok((train, test))
}

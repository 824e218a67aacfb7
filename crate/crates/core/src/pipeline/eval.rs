//! Training on extracted features, identification accuracy, and the
//! hidden-size sweep.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use crate::bpnn::{classify, encode_label, train, BpnnModel, FeatureScaling, Sample, TrainConfig, TrainReport};
use crate::error::{IrisError, Result};
use crate::features::FeatureVector;

/// Reference identification accuracies (percent) by hidden-layer size.
pub const REFERENCE_ACCURACY: [(usize, f64); 5] = [(20, 44.0), (30, 79.6), (40, 85.0), (50, 98.4), (60, 98.0)];

pub const DEFAULT_OUTPUT_BITS: usize = 7;

fn subject_of(f: &FeatureVector) -> Result<u32> {
    f.subject
        .ok_or_else(|| IrisError::InvalidArgument("feature vector has no subject id".into()))
}

/// Scaled inputs paired with binary label targets.
pub fn samples_from_features(features: &[FeatureVector], scaling: &FeatureScaling, o: usize) -> Result<Vec<Sample>> {
    features
        .iter()
        .map(|f| {
            Ok(Sample {
                input: scaling.apply(&f.values),
                target: encode_label(subject_of(f)?, o)?.targets(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub hidden: usize,
    pub output_bits: usize,
    pub use_bias: bool,
}

impl ModelSpec {
    pub fn new(hidden: usize) -> Self {
        ModelSpec {
            hidden,
            output_bits: DEFAULT_OUTPUT_BITS,
            use_bias: true,
        }
    }
}

/// Fits feature scaling on `train_feats`, initializes from `cfg.seed` and trains.
pub fn fit_and_train(train_feats: &[FeatureVector], spec: &ModelSpec, cfg: &TrainConfig) -> Result<(BpnnModel, TrainReport)> {
    let first = train_feats.first().ok_or(IrisError::EmptyDataset)?;
    let n = first.len();
    if let Some(bad) = train_feats.iter().find(|f| f.len() != n) {
        return Err(IrisError::dim(format!("feature rows differ in length: {} vs {n}", bad.len())));
    }
    let scaling = FeatureScaling::fit(train_feats.iter().map(|f| f.values.as_slice()), n)?;
    let samples = samples_from_features(train_feats, &scaling, spec.output_bits)?;
    let mut model = BpnnModel::random(n, spec.hidden, spec.output_bits, cfg.seed, spec.use_bias)?;
    model.scaling = scaling;
    let classes: BTreeSet<u32> = train_feats.iter().map(subject_of).collect::<Result<_>>()?;
    model.classes = classes.into_iter().collect();
    let report = train(&mut model, &samples, cfg)?;
    Ok((model, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalReport {
    pub total: usize,
    /// Output code was exactly the true label.
    pub correct: usize,
    /// Output code was not enrolled but its nearest enrolled class was the true one.
    pub nearest_correct: usize,
    /// Rejected as unknown.
    pub unknown: usize,
    pub misclassified: usize,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        (self.correct + self.nearest_correct) as f64 / self.total as f64
    }
}

/// Classifies labelled features. `reject_threshold` of `o` never rejects.
pub fn evaluate(model: &BpnnModel, features: &[FeatureVector], reject_threshold: u32) -> Result<EvalReport> {
    if features.is_empty() {
        return Err(IrisError::EmptyDataset);
    }
    let mut r = EvalReport {
        total: features.len(),
        ..EvalReport::default()
    };
    for f in features {
        let truth = subject_of(f)?;
        let c = classify(model, &f.values, reject_threshold)?;
        match c.class_id {
            None => r.unknown += 1,
            Some(id) if id == truth && !c.nearest_match => r.correct += 1,
            Some(id) if id == truth => r.nearest_correct += 1,
            Some(_) => r.misclassified += 1,
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub hidden: usize,
    pub repeat: usize,
    pub seed: u64,
    pub epochs: usize,
    pub final_mse: f64,
    pub train: EvalReport,
    pub test: EvalReport,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub train: TrainConfig,
    pub output_bits: usize,
    pub use_bias: bool,
    pub reject_threshold: u32,
}

impl SweepConfig {
    pub fn new(train: TrainConfig) -> Self {
        SweepConfig {
            train,
            output_bits: DEFAULT_OUTPUT_BITS,
            use_bias: true,
            reject_threshold: DEFAULT_OUTPUT_BITS as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessEvent {
    Trained { hidden: usize, repeat: usize },
    TestLoaded,
    Evaluated { hidden: usize, repeat: usize },
}

/// Records the order of sweep stages so callers can check that test data was
/// not touched until every model had been trained.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccessAudit {
    pub events: Vec<AccessEvent>,
}

impl AccessAudit {
    pub fn test_loaded_after_training(&self) -> bool {
        let Some(load) = self.events.iter().position(|e| *e == AccessEvent::TestLoaded) else {
            return false;
        };
        let trained_after = self.events[load..]
            .iter()
            .any(|e| matches!(e, AccessEvent::Trained { .. }));
        let evaluated_before = self.events[..load]
            .iter()
            .any(|e| matches!(e, AccessEvent::Evaluated { .. }));
        !trained_after && !evaluated_before
    }
}

/// Trains `repeats` models per hidden size (seeds `seed + r`), then loads the
/// test features and evaluates every model.
pub fn sweep<F>(
    train_feats: &[FeatureVector],
    load_test: F,
    hiddens: &[usize],
    repeats: usize,
    cfg: &SweepConfig,
    mut audit: Option<&mut AccessAudit>,
) -> Result<Vec<SweepRow>>
where
    F: FnOnce() -> Result<Vec<FeatureVector>>,
{
    if hiddens.is_empty() || repeats == 0 {
        return Err(IrisError::InvalidArgument("sweep needs at least one hidden size and one repeat".into()));
    }
    let mut trained = Vec::new();
    for &hidden in hiddens {
        for repeat in 0..repeats {
            let mut tcfg = cfg.train.clone();
            tcfg.seed = cfg.train.seed.wrapping_add(repeat as u64);
            let spec = ModelSpec {
                hidden,
                output_bits: cfg.output_bits,
                use_bias: cfg.use_bias,
            };
            let t = Instant::now();
            let (model, report) = fit_and_train(train_feats, &spec, &tcfg)?;
            let secs = t.elapsed().as_secs_f64();
            log::info!(
                "h={hidden} repeat={repeat}: {} epochs, mse {:.4e}, {secs:.2}s",
                report.epochs_run,
                report.final_mse
            );
            if let Some(a) = audit.as_deref_mut() {
                a.events.push(AccessEvent::Trained { hidden, repeat });
            }
            trained.push((hidden, repeat, tcfg.seed, model, report, secs));
        }
    }
    let test_feats = load_test()?;
    if let Some(a) = audit.as_deref_mut() {
        a.events.push(AccessEvent::TestLoaded);
    }
    let mut rows = Vec::with_capacity(trained.len());
    for (hidden, repeat, seed, model, report, secs) in trained {
        let train = evaluate(&model, train_feats, cfg.reject_threshold)?;
        let test = evaluate(&model, &test_feats, cfg.reject_threshold)?;
        if let Some(a) = audit.as_deref_mut() {
            a.events.push(AccessEvent::Evaluated { hidden, repeat });
        }
        rows.push(SweepRow {
            hidden,
            repeat,
            seed,
            epochs: report.epochs_run,
            final_mse: report.final_mse,
            train,
            test,
            train_seconds: secs,
        });
    }
    Ok(rows)
}

/// One line per model; wall time is left out so reruns are byte-identical.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "hidden,repeat,seed,epochs,final_mse,train_accuracy,test_accuracy,correct,nearest_correct,unknown,misclassified\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6e},{:.4},{:.4},{},{},{},{}",
            r.hidden,
            r.repeat,
            r.seed,
            r.epochs,
            r.final_mse,
            r.train.accuracy(),
            r.test.accuracy(),
            r.test.correct,
            r.test.nearest_correct,
            r.test.unknown,
            r.test.misclassified
        );
    }
    s
}

/// Mean test accuracy per hidden size, next to the reference figure.
pub fn accuracy_table(rows: &[SweepRow]) -> String {
    let hiddens: BTreeSet<usize> = rows.iter().map(|r| r.hidden).collect();
    let mut s = String::new();
    let _ = writeln!(s, "{:>8} {:>8} {:>12} {:>12} {:>12}", "hidden", "models", "epochs", "accuracy%", "reference%");
    for h in hiddens {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.hidden == h).collect();
        let k = group.len() as f64;
        let acc = group.iter().map(|r| r.test.accuracy()).sum::<f64>() / k * 100.0;
        let epochs = group.iter().map(|r| r.epochs as f64).sum::<f64>() / k;
        let reference = REFERENCE_ACCURACY
            .iter()
            .find(|(rh, _)| *rh == h)
            .map_or("-".to_string(), |(_, a)| format!("{a:.1}"));
        let _ = writeln!(s, "{h:>8} {:>8} {epochs:>12.1} {acc:>12.1} {reference:>12}", group.len());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpnn::BackendKind;

    fn toy(classes: u32, per: usize) -> Vec<FeatureVector> {
        let mut out = Vec::new();
        for c in 0..classes {
            for k in 0..per {
                let values = (0..8)
                    .map(|i| if i as u32 == c { 1.0 } else { 0.0 } + 0.01 * k as f64)
                    .collect();
                out.push(FeatureVector {
                    values,
                    subject: Some(c),
                });
            }
        }
        out
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.5,
            mse_target: 0.005,
            max_epochs: 3000,
            seed: 4,
            backend: BackendKind::Serial,
            workers: 1,
            deterministic_reduction: true,
        }
    }

    #[test]
    fn separable_toy_is_learned() {
        let feats = toy(4, 3);
        let spec = ModelSpec {
            hidden: 8,
            output_bits: 3,
            use_bias: true,
        };
        let (model, _) = fit_and_train(&feats, &spec, &quick_cfg()).unwrap();
        assert_eq!(model.classes, vec![0, 1, 2, 3]);
        let r = evaluate(&model, &feats, 3).unwrap();
        assert_eq!(r.accuracy(), 1.0);
        assert_eq!(r.total, 12);
    }

    #[test]
    fn unlabelled_features_rejected() {
        let mut feats = toy(2, 2);
        feats[1].subject = None;
        assert!(fit_and_train(&feats, &ModelSpec::new(4), &quick_cfg()).is_err());
    }

    #[test]
    fn sweep_trains_before_loading_test() {
        let feats = toy(4, 3);
        let mut cfg = SweepConfig::new(quick_cfg());
        cfg.output_bits = 3;
        cfg.reject_threshold = 3;
        cfg.train.max_epochs = 50;
        let mut audit = AccessAudit::default();
        let test = feats.clone();
        let rows = sweep(&feats, move || Ok(test), &[4, 6], 2, &cfg, Some(&mut audit)).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].seed, 5);
        assert!(audit.test_loaded_after_training());
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 5);
        assert!(accuracy_table(&rows).contains("reference%"));
    }

    #[test]
    fn audit_detects_early_load() {
        let audit = AccessAudit {
            events: vec![
                AccessEvent::TestLoaded,
                AccessEvent::Trained { hidden: 1, repeat: 0 },
            ],
        };
        assert!(!audit.test_loaded_after_training());
    }
}

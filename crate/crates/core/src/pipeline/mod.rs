//! End-to-end dataset handling: manifests, splits, feature extraction,
//! training and evaluation.

pub mod eval;
pub mod manifest;
pub mod run;
pub mod split;
pub mod synth;

pub use eval::{
    accuracy_table, evaluate, fit_and_train, samples_from_features, sweep, sweep_csv, AccessAudit, AccessEvent,
    EvalReport, ModelSpec, SweepConfig, SweepRow, REFERENCE_ACCURACY,
};
pub use manifest::{ingest, parse_manifest, DatasetManifest, ManifestEntry, Source};
pub use run::{
    features_csv, parse_features_csv, process_image, read_features_csv, run_pipeline, write_features_csv,
    ImageFailure, PipelineConfig, PipelineRun, ProcessedImage,
};
pub use split::{split, SplitSpec};
pub use synth::{generate_synthetic, ClassTexture, EyeParams, SynthConfig};

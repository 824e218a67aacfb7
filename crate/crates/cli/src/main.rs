use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use iris_core::bpnn::bench::{bench_iteration, BenchDims};
use iris_core::bpnn::{BackendKind, BpnnModel, ParallelConfig, TrainConfig};
use iris_core::exec::available_workers;
use iris_core::image::GrayImage;
use iris_core::normalize::rubber_sheet;
use iris_core::pipeline::{
    accuracy_table, evaluate, fit_and_train, generate_synthetic, ingest, run_pipeline, split, sweep,
    sweep_csv, write_features_csv, AccessAudit, DatasetManifest, ManifestEntry, ModelSpec, PipelineConfig, PipelineRun,
    SplitSpec, SweepConfig, SynthConfig,
};
use iris_core::preprocess::segment_iris;

/// Highest tolerated share of images that fail segmentation.
const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Parser, Debug)]
#[command(name = "iris", version, about = "Iris recognition: segmentation, normalization, Haar features, BPNN training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic eye-image corpus with a manifest
    Synth(SynthArgs),
    /// Locate pupil, limbus and eyelids in one image
    Segment(ImageArgs),
    /// Segment and unwrap one image onto the polar grid
    Normalize(ImageArgs),
    /// Extract train/test feature CSVs from a manifest
    Features(FeaturesArgs),
    /// Train a classifier on the training split of a manifest
    Train(TrainArgs),
    /// Evaluate a saved model on the test split of a manifest
    Eval(EvalArgs),
    /// Time serial and parallel training iterations
    Bench(BenchArgs),
    /// Train across hidden-layer sizes and report test accuracy per size
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 5)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ImageArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = iris_core::normalize::DEFAULT_RADIAL_RES)]
    radial: usize,
    #[arg(long, default_value_t = iris_core::normalize::DEFAULT_ANGULAR_RES)]
    angular: usize,
}

#[derive(Args, Debug, Clone)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Seeds the split and the network initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct NetArgs {
    #[arg(long, default_value = "serial")]
    backend: BackendKind,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 5000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    mse_target: f64,
    /// Non-deterministic lane reduction in the parallel backend.
    #[arg(long)]
    fast_reduction: bool,
}

impl NetArgs {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            mse_target: self.mse_target,
            max_epochs: self.epochs,
            seed,
            backend: self.backend,
            workers: self.workers.unwrap_or_else(available_workers),
            deterministic_reduction: !self.fast_reduction,
        }
    }
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    #[command(flatten)]
    split: SplitArgs,
    /// Directory for train.csv and test.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, default_value_t = 50)]
    hidden: usize,
    /// Where to write the model file
    #[arg(long, default_value = "model.txt")]
    model: PathBuf,
    /// Optional per-epoch MSE history CSV
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    model: PathBuf,
    /// Maximum Hamming distance to the nearest enrolled code; larger distances are rejected
    #[arg(long)]
    reject_threshold: Option<u32>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 512)]
    hidden: usize,
    #[arg(long, default_value_t = 400)]
    samples: usize,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    fast_reduction: bool,
    /// Timing CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_delimiter = ',', default_value = "20,30,40,50,60")]
    hidden: Vec<usize>,
    /// Models per hidden size; repeat r uses seed + r
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Result CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record and verify that test features are loaded only after all training
    #[arg(long)]
    audit: bool,
}

fn echo(pairs: &[(&str, String)]) {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("# config {}", body.join(" "));
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned())
}

fn load_split(a: &SplitArgs) -> Result<(DatasetManifest, Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    let manifest = ingest(&a.manifest)?;
    let (train, test) = split(
        &manifest,
        &SplitSpec {
            train_fraction: a.train_fraction,
            seed: a.seed,
        },
    )?;
    Ok((manifest, train, test))
}

fn extract(entries: &[ManifestEntry], label: &str) -> Result<PipelineRun> {
    let run = run_pipeline(entries, &PipelineConfig::default());
    println!("{label}: {} images, {} segmentation failures", run.total(), run.failures.len());
    for f in &run.failures {
        println!("  failed {}: {}", f.path.display(), f.reason);
    }
    run.ensure_failure_rate(MAX_FAILURE_RATE)?;
    Ok(run)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    echo(&[
        ("command", "synth".into()),
        ("classes", a.classes.to_string()),
        ("per_class", a.per_class.to_string()),
        ("seed", a.seed.to_string()),
        ("out", a.out.display().to_string()),
    ]);
    let m = generate_synthetic(&SynthConfig::new(a.classes, a.per_class, a.seed), &a.out)?;
    println!("wrote {} images and {}", m.entries.len(), a.out.join("manifest.csv").display());
    Ok(())
}

fn cmd_segment(a: &ImageArgs) -> Result<()> {
    echo(&[("command", "segment".into()), ("image", a.image.display().to_string())]);
    let img = GrayImage::load(&a.image)?;
    let seg = segment_iris(&img, &Default::default())?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let s = stem(&a.image);
    write_file(&a.out.join(format!("{s}.seg")), &seg.to_record())?;
    seg.noise_mask.to_image().save(a.out.join(format!("{s}_noise.pgm")))?;
    println!("pupil {:?}", seg.pupil);
    println!("iris  {:?}", seg.iris);
    println!("eyelids upper {:?} lower {:?}", seg.upper_eyelid, seg.lower_eyelid);
    Ok(())
}

fn cmd_normalize(a: &ImageArgs) -> Result<()> {
    echo(&[
        ("command", "normalize".into()),
        ("image", a.image.display().to_string()),
        ("grid", format!("{}x{}", a.radial, a.angular)),
    ]);
    let img = GrayImage::load(&a.image)?;
    let seg = segment_iris(&img, &Default::default())?;
    let norm = rubber_sheet(&img, &seg, a.radial, a.angular)?;
    let s = stem(&a.image);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    norm.save(&a.out, &s)?;
    write_file(&a.out.join(format!("{s}.csv")), &norm.to_csv())?;
    println!("{} of {} cells valid", norm.valid_count(), a.radial * a.angular);
    Ok(())
}

fn cmd_features(a: &FeaturesArgs) -> Result<()> {
    echo(&[
        ("command", "features".into()),
        ("manifest", a.split.manifest.display().to_string()),
        ("train_fraction", a.split.train_fraction.to_string()),
        ("seed", a.split.seed.to_string()),
    ]);
    let (_, train, test) = load_split(&a.split)?;
    let tr = extract(&train, "train")?;
    let te = extract(&test, "test")?;
    write_features_csv(&a.out.join("train.csv"), &tr.features)?;
    write_features_csv(&a.out.join("test.csv"), &te.features)?;
    Ok(())
}

fn net_echo(split: &SplitArgs, net: &NetArgs, cfg: &TrainConfig) -> Vec<(&'static str, String)> {
    vec![
        ("manifest", split.manifest.display().to_string()),
        ("train_fraction", split.train_fraction.to_string()),
        ("seed", split.seed.to_string()),
        ("backend", format!("{:?}", net.backend).to_lowercase()),
        ("workers", cfg.workers.to_string()),
        ("lr", cfg.learning_rate.to_string()),
        ("epochs", cfg.max_epochs.to_string()),
        ("mse_target", cfg.mse_target.to_string()),
        ("deterministic_reduction", cfg.deterministic_reduction.to_string()),
    ]
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.net.train_config(a.split.seed);
    let mut pairs = vec![("command", "train".to_string()), ("hidden", a.hidden.to_string())];
    pairs.extend(net_echo(&a.split, &a.net, &cfg));
    echo(&pairs);
    let (manifest, train, _) = load_split(&a.split)?;
    let run = extract(&train, "train")?;
    let mut spec = ModelSpec::new(a.hidden);
    let classes = manifest.class_count();
    while (1usize << spec.output_bits) < classes {
        spec.output_bits += 1;
    }
    let (model, report) = fit_and_train(&run.features, &spec, &cfg)?;
    model.save(&a.model)?;
    if let Some(h) = &a.history {
        let mut text = String::from("epoch,mse\n");
        for (i, m) in report.mse_history.iter().enumerate() {
            text.push_str(&format!("{},{m:.9e}\n", i + 1));
        }
        write_file(h, &text)?;
    }
    let train_eval = evaluate(&model, &run.features, spec.output_bits as u32)?;
    println!(
        "trained {}-{}-{}: {} epochs, final mse {:.6e}, train accuracy {:.4}",
        model.n,
        model.h,
        model.o,
        report.epochs_run,
        report.final_mse,
        train_eval.accuracy()
    );
    println!("model written to {}", a.model.display());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = BpnnModel::load(&a.model)?;
    let threshold = a.reject_threshold.unwrap_or(model.o as u32);
    echo(&[
        ("command", "eval".into()),
        ("manifest", a.split.manifest.display().to_string()),
        ("model", a.model.display().to_string()),
        ("train_fraction", a.split.train_fraction.to_string()),
        ("seed", a.split.seed.to_string()),
        ("reject_threshold", threshold.to_string()),
    ]);
    let (_, _, test) = load_split(&a.split)?;
    let run = extract(&test, "test")?;
    let r = evaluate(&model, &run.features, threshold)?;
    println!("hidden,accuracy,total,correct,nearest_correct,unknown,misclassified");
    println!(
        "{},{:.4},{},{},{},{},{}",
        model.h,
        r.accuracy(),
        r.total,
        r.correct,
        r.nearest_correct,
        r.unknown,
        r.misclassified
    );
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let workers = a.workers.unwrap_or_else(available_workers);
    echo(&[
        ("command", "bench".into()),
        ("network", format!("300-{}-7", a.hidden)),
        ("samples", a.samples.to_string()),
        ("workers", workers.to_string()),
        ("repeats", a.repeats.to_string()),
        ("seed", a.seed.to_string()),
        ("deterministic_reduction", (!a.fast_reduction).to_string()),
    ]);
    let report = bench_iteration(
        BenchDims {
            n: 300,
            h: a.hidden,
            o: 7,
        },
        a.samples,
        ParallelConfig {
            worker_count: workers,
            deterministic_reduction: !a.fast_reduction,
        },
        a.seed,
        a.repeats,
    )?;
    print!("{}", report.summary());
    if let Some(out) = &a.out {
        write_file(out, &report.to_csv())?;
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let cfg = a.net.train_config(a.split.seed);
    let hidden: Vec<String> = a.hidden.iter().map(|h| h.to_string()).collect();
    let mut pairs = vec![
        ("command", "sweep".to_string()),
        ("hidden", hidden.join(",")),
        ("repeats", a.repeats.to_string()),
    ];
    pairs.extend(net_echo(&a.split, &a.net, &cfg));
    echo(&pairs);
    let (manifest, train, test) = load_split(&a.split)?;
    let train_run = extract(&train, "train")?;
    let mut sweep_cfg = SweepConfig::new(cfg);
    while (1usize << sweep_cfg.output_bits) < manifest.class_count() {
        sweep_cfg.output_bits += 1;
    }
    sweep_cfg.reject_threshold = sweep_cfg.output_bits as u32;
    let mut audit = AccessAudit::default();
    let rows = sweep(
        &train_run.features,
        || extract(&test, "test").map(|r| r.features).map_err(|e| iris_core::IrisError::InvalidArgument(e.to_string())),
        &a.hidden,
        a.repeats,
        &sweep_cfg,
        a.audit.then_some(&mut audit),
    )?;
    print!("{}", accuracy_table(&rows));
    if a.audit {
        if !audit.test_loaded_after_training() {
            bail!("audit failed: test features were read before training finished");
        }
        println!("audit: test features loaded after all {} models were trained", rows.len());
    }
    if let Some(out) = &a.out {
        write_file(out, &sweep_csv(&rows))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Normalize(a) => cmd_normalize(a),
        Command::Features(a) => cmd_features(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn sweep_hidden_list_parses() {
        let cli = Cli::try_parse_from(["iris", "sweep", "--manifest", "m.csv", "--hidden", "20,50"]).unwrap();
        match cli.command {
            Command::Sweep(a) => assert_eq!(a.hidden, vec![20, 50]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_backend_rejected() {
        assert!(Cli::try_parse_from(["iris", "train", "--manifest", "m", "--backend", "gpu"]).is_err());
    }
}

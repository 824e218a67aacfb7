use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{IrisError, Result};
use crate::exec::available_workers;

use super::backend::{backprop_step, Backend, ParallelBackend, ParallelConfig, SerialBackend, StageTimings};
use super::model::BpnnModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Serial,
    Parallel,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "serial" => Ok(BackendKind::Serial),
            "parallel" => Ok(BackendKind::Parallel),
            other => Err(format!("unknown backend `{other}` (expected serial or parallel)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub mse_target: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub backend: BackendKind,
    pub workers: usize,
    pub deterministic_reduction: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            mse_target: 0.001,
            max_epochs: 5000,
            seed: 0,
            backend: BackendKind::Serial,
            workers: available_workers(),
            deterministic_reduction: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(IrisError::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.mse_target.is_nan() || self.mse_target <= 0.0 {
            return Err(IrisError::InvalidArgument(format!(
                "MSE target must be > 0, got {}",
                self.mse_target
            )));
        }
        if self.max_epochs == 0 {
            return Err(IrisError::InvalidArgument("max_epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn make_backend(&self) -> Result<Box<dyn Backend>> {
        Ok(match self.backend {
            BackendKind::Serial => Box::new(SerialBackend),
            BackendKind::Parallel => Box::new(ParallelBackend::new(ParallelConfig {
                worker_count: self.workers,
                deterministic_reduction: self.deterministic_reduction,
            })?),
        })
    }
}

/// Scaled input vector with its binary target code.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_mse: f64,
    pub mse_history: Vec<f64>,
    pub timings: StageTimings,
}

impl TrainReport {
    /// Everything except wall times.
    pub fn outcome(&self) -> (usize, f64, &[f64]) {
        (self.epochs_run, self.final_mse, &self.mse_history)
    }
}

/// Mean over samples and output neurons of `(t - y)^2`.
pub fn dataset_mse(backend: &dyn Backend, model: &BpnnModel, data: &[Sample]) -> Result<f64> {
    if data.is_empty() {
        return Err(IrisError::EmptyDataset);
    }
    let mut total = 0.0;
    for s in data {
        let hidden = backend.forward_hidden(model, &s.input)?;
        let out = backend.forward_output(model, &hidden)?;
        for (t, y) in s.target.iter().zip(&out) {
            total += (t - y) * (t - y);
        }
    }
    Ok(total / (data.len() * model.o) as f64)
}

/// Per-sample back-propagation until the recomputed epoch MSE reaches
/// `cfg.mse_target` or `cfg.max_epochs` epochs have run. The visiting order is
/// one seeded shuffle reused for every epoch.
pub fn train(model: &mut BpnnModel, data: &[Sample], cfg: &TrainConfig) -> Result<TrainReport> {
    let backend = cfg.make_backend()?;
    train_with(backend.as_ref(), model, data, cfg)
}

pub fn train_with(backend: &dyn Backend, model: &mut BpnnModel, data: &[Sample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    model.validate()?;
    if data.is_empty() {
        return Err(IrisError::EmptyDataset);
    }
    for s in data {
        if s.input.len() != model.n || s.target.len() != model.o {
            return Err(IrisError::dim(format!(
                "sample shape {}/{} does not match model {}/{}",
                s.input.len(),
                s.target.len(),
                model.n,
                model.o
            )));
        }
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    order.shuffle(&mut rng);

    let mut timings = StageTimings::default();
    let mut history = Vec::new();
    for _ in 0..cfg.max_epochs {
        for &i in &order {
            let s = &data[i];
            backprop_step(backend, model, &s.input, &s.target, cfg.learning_rate, Some(&mut timings))?;
        }
        let t = Instant::now();
        let mse = dataset_mse(backend, model, data)?;
        timings.mse += t.elapsed();
        history.push(mse);
        if mse <= cfg.mse_target {
            break;
        }
    }
    log::debug!(
        "trained {}-{}-{} for {} epochs on {} backend, mse {:.3e}",
        model.n,
        model.h,
        model.o,
        history.len(),
        backend.name(),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(TrainReport {
        epochs_run: history.len(),
        final_mse: *history.last().expect("at least one epoch"),
        mse_history: history,
        timings,
    })
}

//! The four per-sample stages behind a common trait, with a serial reference
//! backend and a block-partitioned worker-pool backend.
//!
//! Stage 1 computes hidden activations, stage 2 output activations, stage 3
//! updates W2/b2 and stage 4 updates W1/b1. Hidden error terms are taken from
//! W2 before stage 3 writes it.

use std::time::{Duration, Instant};

use crate::error::{IrisError, Result};
use crate::exec::{available_workers, block_ranges, WorkerPool};

use super::kernels::{self, Reduction};
use super::model::BpnnModel;

/// Forward state and error terms of one sample, consumed by stages 3 and 4.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStep {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
    pub delta_out: Vec<f64>,
    pub delta_hid: Vec<f64>,
}

impl UpdateStep {
    pub fn squared_error(&self, target: &[f64]) -> f64 {
        target
            .iter()
            .zip(&self.output)
            .map(|(t, y)| (t - y) * (t - y))
            .sum()
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    fn workers(&self) -> usize;

    /// Stage 1.
    fn forward_hidden(&self, model: &BpnnModel, input: &[f64]) -> Result<Vec<f64>>;

    /// Stage 2.
    fn forward_output(&self, model: &BpnnModel, hidden: &[f64]) -> Result<Vec<f64>>;

    /// Hidden error terms from the current (pre-update) W2.
    fn hidden_deltas(&self, model: &BpnnModel, hidden: &[f64], delta_out: &[f64]) -> Vec<f64>;

    /// Stage 3.
    fn update_output_weights(&self, model: &mut BpnnModel, step: &UpdateStep, lr: f64);

    /// Stage 4.
    fn update_hidden_weights(&self, model: &mut BpnnModel, step: &UpdateStep, input: &[f64], lr: f64);
}

fn check_input(model: &BpnnModel, input: &[f64]) -> Result<()> {
    if input.len() != model.n {
        return Err(IrisError::dim(format!(
            "input has {} values, model expects {}",
            input.len(),
            model.n
        )));
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(IrisError::InvalidArgument("input contains a non-finite value".into()));
    }
    Ok(())
}

fn check_hidden(model: &BpnnModel, hidden: &[f64]) -> Result<()> {
    if hidden.len() != model.h {
        return Err(IrisError::dim(format!(
            "hidden vector has {} values, model expects {}",
            hidden.len(),
            model.h
        )));
    }
    Ok(())
}

fn check_target(model: &BpnnModel, target: &[f64]) -> Result<()> {
    if target.len() != model.o {
        return Err(IrisError::dim(format!(
            "target has {} bits, model expects {}",
            target.len(),
            model.o
        )));
    }
    if target.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(IrisError::InvalidArgument("target bits must be 0 or 1".into()));
    }
    Ok(())
}

/// Single-threaded reference backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialBackend;

impl Backend for SerialBackend {
    fn name(&self) -> &'static str {
        "serial"
    }

    fn workers(&self) -> usize {
        1
    }

    fn forward_hidden(&self, model: &BpnnModel, input: &[f64]) -> Result<Vec<f64>> {
        check_input(model, input)?;
        let mut out = vec![0.0; model.h];
        kernels::layer_block(&model.w1, &model.b1, model.n, input, 0..model.h, &mut out, Reduction::Ordered);
        Ok(out)
    }

    fn forward_output(&self, model: &BpnnModel, hidden: &[f64]) -> Result<Vec<f64>> {
        check_hidden(model, hidden)?;
        let mut out = vec![0.0; model.o];
        kernels::layer_block(&model.w2, &model.b2, model.h, hidden, 0..model.o, &mut out, Reduction::Ordered);
        Ok(out)
    }

    fn hidden_deltas(&self, model: &BpnnModel, hidden: &[f64], delta_out: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; model.h];
        kernels::hidden_delta_block(&model.w2, model.h, delta_out, hidden, 0..model.h, &mut out, Reduction::Ordered);
        out
    }

    fn update_output_weights(&self, model: &mut BpnnModel, step: &UpdateStep, lr: f64) {
        let len = model.w2.len();
        kernels::weight_step_block(&mut model.w2, 0..len, model.h, lr, &step.delta_out, &step.hidden);
        if model.use_bias {
            kernels::bias_step(&mut model.b2, lr, &step.delta_out);
        }
    }

    fn update_hidden_weights(&self, model: &mut BpnnModel, step: &UpdateStep, input: &[f64], lr: f64) {
        let len = model.w1.len();
        kernels::weight_step_block(&mut model.w1, 0..len, model.n, lr, &step.delta_hid, input);
        if model.use_bias {
            kernels::bias_step(&mut model.b1, lr, &step.delta_hid);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParallelConfig {
    pub worker_count: usize,
    pub deterministic_reduction: bool,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        ParallelConfig {
            worker_count: available_workers(),
            deterministic_reduction: true,
        }
    }
}

/// Worker-pool backend. Neurons (and weight rows) are split into contiguous
/// blocks, one per worker; each block is written by exactly one worker and
/// every stage joins all workers before returning.
#[derive(Debug)]
pub struct ParallelBackend {
    cfg: ParallelConfig,
    pool: WorkerPool,
}

impl ParallelBackend {
    pub fn new(cfg: ParallelConfig) -> Result<Self> {
        let pool = WorkerPool::new(cfg.worker_count)?;
        Ok(ParallelBackend { cfg, pool })
    }

    pub fn config(&self) -> ParallelConfig {
        self.cfg
    }

    fn reduction(&self) -> Reduction {
        if self.cfg.deterministic_reduction {
            Reduction::Ordered
        } else {
            Reduction::Lanes
        }
    }

    /// Flat weight ranges owned by each worker when `rows` rows of `fan_in`
    /// weights are partitioned by row.
    pub fn row_blocks(&self, rows: usize, fan_in: usize) -> Vec<std::ops::Range<usize>> {
        block_ranges(rows, self.cfg.worker_count)
            .into_iter()
            .map(|r| r.start * fan_in..r.end * fan_in)
            .collect()
    }
}

impl Backend for ParallelBackend {
    fn name(&self) -> &'static str {
        "parallel"
    }

    fn workers(&self) -> usize {
        self.cfg.worker_count
    }

    fn forward_hidden(&self, model: &BpnnModel, input: &[f64]) -> Result<Vec<f64>> {
        check_input(model, input)?;
        let mut out = vec![0.0; model.h];
        let ranges = block_ranges(model.h, self.cfg.worker_count);
        let red = self.reduction();
        self.pool.run_blocks(&mut out, &ranges, |rows, block| {
            kernels::layer_block(&model.w1, &model.b1, model.n, input, rows, block, red)
        });
        Ok(out)
    }

    fn forward_output(&self, model: &BpnnModel, hidden: &[f64]) -> Result<Vec<f64>> {
        check_hidden(model, hidden)?;
        let mut out = vec![0.0; model.o];
        let ranges = block_ranges(model.o, self.cfg.worker_count);
        let red = self.reduction();
        self.pool.run_blocks(&mut out, &ranges, |rows, block| {
            kernels::layer_block(&model.w2, &model.b2, model.h, hidden, rows, block, red)
        });
        Ok(out)
    }

    fn hidden_deltas(&self, model: &BpnnModel, hidden: &[f64], delta_out: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; model.h];
        let ranges = block_ranges(model.h, self.cfg.worker_count);
        let red = self.reduction();
        self.pool.run_blocks(&mut out, &ranges, |rows, block| {
            kernels::hidden_delta_block(&model.w2, model.h, delta_out, hidden, rows, block, red)
        });
        out
    }

    fn update_output_weights(&self, model: &mut BpnnModel, step: &UpdateStep, lr: f64) {
        // W2 has only `o` rows, so it is split element-wise instead of by row
        let ranges = block_ranges(model.w2.len(), self.cfg.worker_count);
        let h = model.h;
        self.pool.run_blocks(&mut model.w2, &ranges, |flat, block| {
            kernels::weight_step_block(block, flat, h, lr, &step.delta_out, &step.hidden)
        });
        if model.use_bias {
            kernels::bias_step(&mut model.b2, lr, &step.delta_out);
        }
    }

    fn update_hidden_weights(&self, model: &mut BpnnModel, step: &UpdateStep, input: &[f64], lr: f64) {
        let ranges = self.row_blocks(model.h, model.n);
        let n = model.n;
        self.pool.run_blocks(&mut model.w1, &ranges, |flat, block| {
            kernels::weight_step_block(block, flat, n, lr, &step.delta_hid, input)
        });
        if model.use_bias {
            let ranges = block_ranges(model.h, self.cfg.worker_count);
            self.pool.run_blocks(&mut model.b1, &ranges, |rows, block| {
                kernels::bias_step(block, lr, &step.delta_hid[rows])
            });
        }
    }
}

/// Wall time spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub forward_hidden: Duration,
    pub forward_output: Duration,
    pub update_output: Duration,
    pub update_hidden: Duration,
    pub mse: Duration,
}

impl StageTimings {
    pub fn iteration_total(&self) -> Duration {
        self.forward_hidden + self.forward_output + self.update_output + self.update_hidden
    }

    pub fn stages(&self) -> [(&'static str, Duration); 4] {
        [
            ("forward_hidden", self.forward_hidden),
            ("forward_output", self.forward_output),
            ("update_output", self.update_output),
            ("update_hidden", self.update_hidden),
        ]
    }
}

/// Stages 1 and 2 plus the error terms for one sample.
pub fn forward_step(backend: &dyn Backend, model: &BpnnModel, input: &[f64], target: &[f64]) -> Result<UpdateStep> {
    check_target(model, target)?;
    let hidden = backend.forward_hidden(model, input)?;
    let output = backend.forward_output(model, &hidden)?;
    let delta_out = kernels::output_deltas(target, &output);
    let delta_hid = backend.hidden_deltas(model, &hidden, &delta_out);
    Ok(UpdateStep {
        hidden,
        output,
        delta_out,
        delta_hid,
    })
}

/// One per-sample gradient step on `E = sum_j (t_j - y_j)^2 / 2`.
/// Returns the step state and the squared error `sum_j (t_j - y_j)^2`
/// measured before the update.
pub fn backprop_step(
    backend: &dyn Backend,
    model: &mut BpnnModel,
    input: &[f64],
    target: &[f64],
    lr: f64,
    timings: Option<&mut StageTimings>,
) -> Result<(UpdateStep, f64)> {
    if !lr.is_finite() || lr < 0.0 {
        return Err(IrisError::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
    }
    check_target(model, target)?;
    let Some(t) = timings else {
        let step = forward_step(backend, model, input, target)?;
        let err = step.squared_error(target);
        backend.update_output_weights(model, &step, lr);
        backend.update_hidden_weights(model, &step, input, lr);
        return Ok((step, err));
    };
    let t0 = Instant::now();
    let hidden = backend.forward_hidden(model, input)?;
    let t1 = Instant::now();
    let output = backend.forward_output(model, &hidden)?;
    let t2 = Instant::now();
    let delta_out = kernels::output_deltas(target, &output);
    let delta_hid = backend.hidden_deltas(model, &hidden, &delta_out);
    let step = UpdateStep {
        hidden,
        output,
        delta_out,
        delta_hid,
    };
    backend.update_output_weights(model, &step, lr);
    let t3 = Instant::now();
    backend.update_hidden_weights(model, &step, input, lr);
    let t4 = Instant::now();
    t.forward_hidden += t1 - t0;
    t.forward_output += t2 - t1;
    t.update_output += t3 - t2;
    t.update_hidden += t4 - t3;
    let err = step.squared_error(target);
    Ok((step, err))
}

/// Stage 1 on the serial backend.
pub fn forward_hidden(model: &BpnnModel, input: &[f64]) -> Result<Vec<f64>> {
    SerialBackend.forward_hidden(model, input)
}

/// Stage 2 on the serial backend.
pub fn forward_output(model: &BpnnModel, hidden: &[f64]) -> Result<Vec<f64>> {
    SerialBackend.forward_output(model, hidden)
}

/// Full forward pass on the serial backend.
pub fn forward(model: &BpnnModel, input: &[f64]) -> Result<Vec<f64>> {
    let hidden = forward_hidden(model, input)?;
    forward_output(model, &hidden)
}

/// Serial per-sample update; returns the squared error before the update.
pub fn backprop_update(model: &mut BpnnModel, input: &[f64], target: &[f64], lr: f64) -> Result<f64> {
    backprop_step(&SerialBackend, model, input, target, lr, None).map(|(_, e)| e)
}

/// Partial derivatives of `E = sum_j (t_j - y_j)^2 / 2`, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Analytic gradients for one sample. Applying `w -= lr * g` reproduces
/// [`backprop_update`] exactly.
pub fn gradients(model: &BpnnModel, input: &[f64], target: &[f64]) -> Result<Gradients> {
    let step = forward_step(&SerialBackend, model, input, target)?;
    let w1 = (0..model.w1.len())
        .map(|f| -(step.delta_hid[f / model.n] * input[f % model.n]))
        .collect();
    let w2 = (0..model.w2.len())
        .map(|f| -(step.delta_out[f / model.h] * step.hidden[f % model.h]))
        .collect();
    let zero_if_no_bias = |d: &[f64]| -> Vec<f64> {
        if model.use_bias {
            d.iter().map(|v| -v).collect()
        } else {
            vec![0.0; d.len()]
        }
    };
    Ok(Gradients {
        w1,
        b1: zero_if_no_bias(&step.delta_hid),
        w2,
        b2: zero_if_no_bias(&step.delta_out),
    })
}

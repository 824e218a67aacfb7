//! Serial-versus-parallel timing of full training iterations.

use std::fmt::Write as _;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::backend::{backprop_step, Backend, ParallelBackend, ParallelConfig, SerialBackend, StageTimings};
use super::model::{encode_label, BpnnModel};
use super::train::Sample;

/// Published GPU speedups quoted for reference next to measured numbers.
pub const REFERENCE_TABLE_SPEEDUP: f64 = 36.0;
pub const REFERENCE_SUMMARY_SPEEDUP: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchDims {
    pub n: usize,
    pub h: usize,
    pub o: usize,
}

impl Default for BenchDims {
    fn default() -> Self {
        BenchDims { n: 300, h: 512, o: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub dims: BenchDims,
    pub samples: usize,
    pub workers: usize,
    pub serial: StageTimings,
    pub parallel: StageTimings,
    /// Serial iteration time over parallel iteration time.
    pub speedup: f64,
    /// Whether both backends produced bit-identical models.
    pub equivalent: bool,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn ratio(a: Duration, b: Duration) -> f64 {
    if b.is_zero() {
        f64::INFINITY
    } else {
        secs(a) / secs(b)
    }
}

impl BenchReport {
    /// CSV with header `backend,stage,workers,samples,hidden,seconds,speedup`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("backend,stage,workers,samples,hidden,seconds,speedup\n");
        let rows = |s: &mut String, name: &str, workers: usize, t: &StageTimings, reference: Option<&StageTimings>| {
            let mut stages: Vec<(&str, Duration)> = t.stages().to_vec();
            stages.push(("iteration", t.iteration_total()));
            let base: Vec<Duration> = match reference {
                Some(r) => {
                    let mut v: Vec<Duration> = r.stages().iter().map(|x| x.1).collect();
                    v.push(r.iteration_total());
                    v
                }
                None => stages.iter().map(|x| x.1).collect(),
            };
            for ((stage, d), b) in stages.iter().zip(base) {
                let _ = writeln!(
                    s,
                    "{name},{stage},{workers},{},{},{:.9},{:.4}",
                    self.samples,
                    self.dims.h,
                    secs(*d),
                    ratio(b, *d)
                );
            }
        };
        rows(&mut s, "serial", 1, &self.serial, None);
        rows(&mut s, "parallel", self.workers, &self.parallel, Some(&self.serial));
        s
    }

    /// Run-time / speed-enhancement table with the published GPU figures as
    /// reference lines.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "network {}-{}-{}, {} samples per iteration",
            self.dims.n, self.dims.h, self.dims.o, self.samples
        );
        let _ = writeln!(s, "{:<16}{:>20}{:>20}", "processor", "Run time (second)", "Speed enhancement");
        let _ = writeln!(s, "{:<16}{:>20.6}{:>20}", "serial", secs(self.serial.iteration_total()), "");
        let _ = writeln!(
            s,
            "{:<16}{:>20.6}{:>20.2}",
            format!("parallel x{}", self.workers),
            secs(self.parallel.iteration_total()),
            self.speedup
        );
        let _ = writeln!(
            s,
            "reference (published, GPU vs CPU): {REFERENCE_TABLE_SPEEDUP}x in the results table, {REFERENCE_SUMMARY_SPEEDUP}x in the summary; not reproducible on CPU workers"
        );
        let _ = writeln!(s, "backends bit-identical: {}", self.equivalent);
        s
    }
}

/// Random inputs in `[0, 1)` with random `o`-bit class targets.
pub fn random_samples(n: usize, o: usize, count: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = 1u32 << o.min(31);
    (0..count)
        .map(|_| {
            let input = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let class = rng.random_range(0..classes);
            Sample {
                input,
                target: encode_label(class, o).expect("class fits").targets(),
            }
        })
        .collect()
}

fn time_iteration(backend: &dyn Backend, model: &BpnnModel, data: &[Sample], lr: f64) -> Result<(StageTimings, BpnnModel)> {
    let mut m = model.clone();
    let mut t = StageTimings::default();
    for s in data {
        backprop_step(backend, &mut m, &s.input, &s.target, lr, Some(&mut t))?;
    }
    Ok((t, m))
}

/// Times one full iteration (every sample through all four stages) on both
/// backends, `repeats` times each, keeping the fastest run of each.
pub fn bench_iteration(dims: BenchDims, samples: usize, cfg: ParallelConfig, seed: u64, repeats: usize) -> Result<BenchReport> {
    let model = BpnnModel::random(dims.n, dims.h, dims.o, seed, true)?;
    let data = random_samples(dims.n, dims.o, samples, seed.wrapping_add(1));
    let parallel = ParallelBackend::new(cfg)?;
    let lr = 0.1;

    let mut best_serial: Option<(StageTimings, BpnnModel)> = None;
    let mut best_parallel: Option<(StageTimings, BpnnModel)> = None;
    for _ in 0..repeats.max(1) {
        let s = time_iteration(&SerialBackend, &model, &data, lr)?;
        if best_serial.as_ref().is_none_or(|b| s.0.iteration_total() < b.0.iteration_total()) {
            best_serial = Some(s);
        }
        let p = time_iteration(&parallel, &model, &data, lr)?;
        if best_parallel.as_ref().is_none_or(|b| p.0.iteration_total() < b.0.iteration_total()) {
            best_parallel = Some(p);
        }
    }
    let (serial_t, serial_m) = best_serial.expect("at least one repeat");
    let (par_t, par_m) = best_parallel.expect("at least one repeat");
    Ok(BenchReport {
        dims,
        samples,
        workers: cfg.worker_count,
        serial: serial_t,
        parallel: par_t,
        speedup: ratio(serial_t.iteration_total(), par_t.iteration_total()),
        equivalent: serial_m == par_m,
    })
}

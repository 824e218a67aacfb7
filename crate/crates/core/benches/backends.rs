use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iris_core::bpnn::bench::random_samples;
use iris_core::bpnn::{train_with, Backend, BackendKind, BpnnModel, ParallelBackend, ParallelConfig, SerialBackend, TrainConfig};
use iris_core::exec::available_workers;
use iris_core::image::Mask;
use iris_core::preprocess::{hough_circle, Circle};

fn epoch(c: &mut Criterion) {
    let samples = random_samples(300, 7, 16, 1);
    let mut group = c.benchmark_group("epoch_300x7_16samples");
    group.sample_size(10);
    for h in [64, 512] {
        let base = BpnnModel::random(300, h, 7, 1, true).unwrap();
        let cfg = TrainConfig {
            max_epochs: 1,
            mse_target: 1e-12,
            backend: BackendKind::Serial,
            ..TrainConfig::default()
        };
        let workers = available_workers().max(2);
        let backends: Vec<Box<dyn Backend>> = vec![
            Box::new(SerialBackend),
            Box::new(
                ParallelBackend::new(ParallelConfig {
                    worker_count: workers,
                    deterministic_reduction: true,
                })
                .unwrap(),
            ),
        ];
        for backend in &backends {
            group.bench_with_input(BenchmarkId::new(backend.name(), h), &h, |b, _| {
                b.iter(|| {
                    let mut model = base.clone();
                    train_with(backend.as_ref(), &mut model, &samples, &cfg).unwrap();
                    black_box(model.w2[0])
                })
            });
        }
    }
    group.finish();
}

fn hough(c: &mut Criterion) {
    let (w, h) = (320, 280);
    let truth = Circle::new(160.0, 140.0, 60.0);
    let mut edges = Mask::empty(w, h);
    for k in 0..720 {
        let t = k as f64 * std::f64::consts::TAU / 720.0;
        let x = (truth.cx + truth.r * t.cos()).round() as usize;
        let y = (truth.cy + truth.r * t.sin()).round() as usize;
        edges.set(x, y, true);
    }
    c.bench_function("hough_circle_320x280_r20_80", |b| {
        b.iter(|| black_box(hough_circle(&edges, 20, 80).unwrap()))
    });
}

criterion_group!(benches, epoch, hough);
criterion_main!(benches);

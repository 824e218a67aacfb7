use iris_core::bpnn::bench::random_samples;
use iris_core::bpnn::{train_with, BackendKind, BpnnModel, ParallelBackend, ParallelConfig, SerialBackend, TrainConfig};

fn cfg() -> TrainConfig {
    TrainConfig {
        max_epochs: 5,
        mse_target: 1e-12,
        backend: BackendKind::Serial,
        ..TrainConfig::default()
    }
}

fn max_diff(a: &BpnnModel, b: &BpnnModel) -> f64 {
    [(&a.w1, &b.w1), (&a.b1, &b.b1), (&a.w2, &b.w2), (&a.b2, &b.b2)]
        .iter()
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn deterministic_training_matches_serial_bit_for_bit() {
    let data = random_samples(300, 7, 12, 9);
    let base = BpnnModel::random(300, 40, 7, 9, true).unwrap();
    let mut serial = base.clone();
    let rs = train_with(&SerialBackend, &mut serial, &data, &cfg()).unwrap();
    for workers in [2, 3, 8] {
        let b = ParallelBackend::new(ParallelConfig {
            worker_count: workers,
            deterministic_reduction: true,
        })
        .unwrap();
        let mut par = base.clone();
        let rp = train_with(&b, &mut par, &data, &cfg()).unwrap();
        assert_eq!(serial, par, "workers {workers}");
        assert_eq!(rs.outcome(), rp.outcome());
    }
}

#[test]
fn lane_reduction_stays_close() {
    let data = random_samples(300, 7, 12, 10);
    let base = BpnnModel::random(300, 40, 7, 10, true).unwrap();
    let mut serial = base.clone();
    train_with(&SerialBackend, &mut serial, &data, &cfg()).unwrap();
    let b = ParallelBackend::new(ParallelConfig {
        worker_count: 4,
        deterministic_reduction: false,
    })
    .unwrap();
    let mut par = base.clone();
    train_with(&b, &mut par, &data, &cfg()).unwrap();
    let d = max_diff(&serial, &par);
    assert!(d < 1e-10, "{d}");
}

//! Three-layer back-propagation classifier with interchangeable serial and
//! worker-pool backends.

mod backend;
pub mod bench;
mod classify;
pub mod kernels;
mod model;
mod train;

pub use backend::{
    backprop_step, backprop_update, forward, forward_hidden, forward_output, forward_step, gradients, Backend,
    Gradients, ParallelBackend, ParallelConfig, SerialBackend, StageTimings, UpdateStep,
};
pub use bench::{bench_iteration, BenchDims, BenchReport};
pub use classify::{classify, decode_outputs, round_outputs, Classification};
pub use kernels::{sigmoid, Reduction};
pub use model::{decode_label, encode_label, BpnnModel, FeatureScaling, LabelCode};
pub use train::{dataset_mse, train, train_with, BackendKind, Sample, TrainConfig, TrainReport};

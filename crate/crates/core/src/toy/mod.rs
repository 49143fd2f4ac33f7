//! Synthetic blob images and a linear model trained from scratch, used to
//! compare the two representations at small input sizes.

pub mod dataset;
pub mod experiment;
pub mod format;
pub mod model;
pub mod train;

pub use dataset::{gen_dataset, gen_dataset_stream, Dataset, SyntheticSample};
pub use experiment::{run_compare, run_sweep_k, CompareRow, ExperimentConfig, SweepRow};
pub use model::{Head, Logits, ModelGrad, SampleTargets, TargetParams, ToyModel};
pub use train::{evaluate, evaluate_predictions, predict, train, EvalConfig, TrainConfig, TrainOutcome};

//! End-to-end toy experiments: generate data, train each head from zero,
//! evaluate on a held-out split.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::loss::LossKind;
use crate::metrics::MetricsReport;
use crate::quantization::simdr_error_bound;
use crate::repr::ImageDims;

use super::dataset::{gen_dataset_stream, Dataset};
use super::model::{Head, TargetParams, ToyModel};
use super::train::{evaluate, train, EvalConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dims: ImageDims,
    pub n_keypoints: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub blob_sigma: f64,
    pub noise: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub k: u32,
    pub lambda: u32,
    /// Heatmap target sigma in cells.
    pub heatmap_sigma: f64,
    /// `CrossEntropy` (smoothed one-hot) or `KlDivergence` (space-aware).
    pub simdr_loss: LossKind,
    pub targets: TargetParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: ImageDims::new(16, 16).expect("static dims"),
            n_keypoints: 1,
            n_train: 5000,
            n_test: 1000,
            blob_sigma: 1.5,
            noise: 0.05,
            epochs: 50,
            learning_rate: 0.5,
            batch_size: 32,
            seed: 1,
            k: 2,
            lambda: 4,
            heatmap_sigma: 1.0,
            simdr_loss: LossKind::CrossEntropy,
            targets: TargetParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn datasets(&self) -> Result<(Dataset, Dataset)> {
        let gen = |n, stream| {
            gen_dataset_stream(
                n,
                self.dims,
                self.n_keypoints,
                self.blob_sigma,
                self.noise,
                self.seed,
                stream,
            )
        };
        Ok((gen(self.n_train, "dataset/train")?, gen(self.n_test, "dataset/test")?))
    }

    fn train_config(&self, loss: LossKind) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            loss,
            targets: self.targets,
        }
    }

    fn run_head(&self, head: Head, loss: LossKind, train_set: &Dataset) -> Result<(ToyModel, f64)> {
        let model = ToyModel::zeros(self.dims, self.n_keypoints, head)?;
        let out = train(&model, train_set, &self.train_config(loss))?;
        let final_loss = out.loss_curve.last().copied().unwrap_or(f64::NAN);
        Ok((out.model, final_loss))
    }
}

/// One row of the representation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub head: String,
    pub param: u32,
    pub decode: String,
    pub mean_px_error: f64,
    #[serde(rename = "pckh@0.1")]
    pub pckh_01: f64,
    pub oks_ap: f64,
    pub final_loss: f64,
}

impl CompareRow {
    fn new(head: Head, decode: &str, report: &MetricsReport, final_loss: f64) -> Self {
        Self {
            head: head.name().to_string(),
            param: head.param(),
            decode: decode.to_string(),
            mean_px_error: report.mean_px_error,
            pckh_01: report.pckh_01,
            oks_ap: report.ap,
            final_loss,
        }
    }
}

/// Trains the 1D head (splitting factor `k`) and the heatmap head
/// (ratio `lambda`) on the same data and seed. Rows: `simdr/argmax`,
/// `heatmap/plain`, `heatmap/shift`.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    if !matches!(cfg.simdr_loss, LossKind::CrossEntropy | LossKind::KlDivergence) {
        return invalid("the 1D head trains with cross-entropy or KL");
    }
    let (train_set, test_set) = cfg.datasets()?;

    let simdr = Head::SimDR { k: cfg.k };
    let (model, loss) = cfg.run_head(simdr, cfg.simdr_loss, &train_set)?;
    let report = evaluate(&model, &test_set, &EvalConfig::default())?;
    let mut rows = vec![CompareRow::new(simdr, "argmax", &report, loss)];

    let heatmap = Head::Heatmap {
        lambda: cfg.lambda,
        sigma: cfg.heatmap_sigma,
    };
    let (model, loss) = cfg.run_head(heatmap, LossKind::Mse, &train_set)?;
    for (name, shift) in [("plain", false), ("shift", true)] {
        let report = evaluate(&model, &test_set, &EvalConfig { heatmap_shift: shift })?;
        rows.push(CompareRow::new(heatmap, name, &report, loss));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: u32,
    pub mean_px_error: f64,
    #[serde(rename = "pckh@0.1")]
    pub pckh_01: f64,
    pub oks_ap: f64,
    /// Analytic quantization error bound `1 / (2k)`.
    pub quant_floor: f64,
}

/// Trains and evaluates the 1D head once per splitting factor, all on the
/// same data and seed.
pub fn run_sweep_k(cfg: &ExperimentConfig, ks: &[u32]) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return invalid("k list is empty");
    }
    let (train_set, test_set) = cfg.datasets()?;
    ks.iter()
        .map(|&k| {
            let (model, _) = cfg.run_head(Head::SimDR { k }, cfg.simdr_loss, &train_set)?;
            let report = evaluate(&model, &test_set, &EvalConfig::default())?;
            Ok(SweepRow {
                k,
                mean_px_error: report.mean_px_error,
                pckh_01: report.pckh_01,
                oks_ap: report.ap,
                quant_floor: simdr_error_bound(k),
            })
        })
        .collect()
}

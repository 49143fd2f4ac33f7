use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::decode::{decode_heatmap_grid, decode_simdr, DecodedKeypoint};
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::loss::LossKind;
use crate::metrics::{average_precision, mean_px_error, oks, pckh, MatchResult, MetricsReport};
use crate::repr::Pose;
use crate::rng::sub_rng;

use super::dataset::{Dataset, SyntheticSample};
use super::model::{Head, Logits, SampleTargets, TargetParams, ToyModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub targets: TargetParams,
}

impl TrainConfig {
    /// Plain SGD settings of the default toy experiment for `loss`.
    pub fn toy_default(loss: LossKind, seed: u64) -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 50,
            batch_size: 32,
            seed,
            loss,
            targets: TargetParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ToyModel,
    /// Mean training loss over the whole dataset after each epoch.
    pub loss_curve: Vec<f64>,
}

/// Mini-batch SGD from `model`. The shuffle order comes from the
/// `train/shuffle` stream of `cfg.seed`, so runs are reproducible.
pub fn train(model: &ToyModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return invalid("cannot train on an empty dataset");
    }
    if !model.head().accepts(cfg.loss) {
        return invalid(format!(
            "loss {:?} does not fit a {} head",
            cfg.loss,
            model.head().name()
        ));
    }
    if data.dims() != model.dims() || data.n_keypoints() != model.n_keypoints() {
        return invalid("dataset and model disagree on image size or keypoint count");
    }
    if cfg.batch_size == 0 {
        return invalid("batch size must be >= 1");
    }
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return invalid(format!("learning rate must be non-negative, got {}", cfg.learning_rate));
    }

    let targets: Vec<SampleTargets> = data
        .samples()
        .iter()
        .map(|s| model.targets(s, cfg.loss, &cfg.targets))
        .collect::<Result<_>>()?;
    let pairs: Vec<(&Grid, &SampleTargets)> = data.samples().iter().map(|s| &s.image).zip(&targets).collect();

    let mut model = model.clone();
    let mut rng = sub_rng(cfg.seed, "train/shuffle");
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| pairs[i]));
            let (_, grad) = model.batch_gradient(&batch, cfg.loss)?;
            for (w, g) in model.weights_mut().iter_mut().zip(&grad.weights) {
                *w -= cfg.learning_rate * g;
            }
            for (b, g) in model.biases_mut().iter_mut().zip(&grad.biases) {
                *b -= cfg.learning_rate * g;
            }
        }
        curve.push(model.batch_loss(&pairs, cfg.loss)?);
    }
    Ok(TrainOutcome {
        model,
        loss_curve: curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Quarter-cell peak shift for heatmap heads.
    pub heatmap_shift: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { heatmap_shift: true }
    }
}

/// Decoded keypoints of one image.
pub fn predict(model: &ToyModel, image: &Grid, cfg: &EvalConfig) -> Result<Vec<DecodedKeypoint>> {
    match (model.forward(image)?, model.head()) {
        (Logits::SimDR(v), Head::SimDR { k }) => v.iter().map(|(x, y)| decode_simdr(x, y, k)).collect(),
        (Logits::Heatmap(g), Head::Heatmap { lambda, .. }) => g
            .iter()
            .map(|grid| decode_heatmap_grid(grid, lambda, cfg.heatmap_shift))
            .collect(),
        _ => unreachable!("logit layout follows the head"),
    }
}

pub fn evaluate(model: &ToyModel, data: &Dataset, cfg: &EvalConfig) -> Result<MetricsReport> {
    if data.dims() != model.dims() || data.n_keypoints() != model.n_keypoints() {
        return invalid("dataset and model disagree on image size or keypoint count");
    }
    let preds: Vec<Vec<DecodedKeypoint>> = data
        .samples()
        .iter()
        .map(|s| predict(model, &s.image, cfg))
        .collect::<Result<_>>()?;
    evaluate_predictions(&preds, data.samples())
}

/// Metrics of per-sample predictions against the samples' ground truth.
///
/// PCKh uses each sample's object scale as the reference length.
pub fn evaluate_predictions(preds: &[Vec<DecodedKeypoint>], samples: &[SyntheticSample]) -> Result<MetricsReport> {
    if samples.is_empty() {
        return invalid("cannot evaluate on an empty dataset");
    }
    if preds.len() != samples.len() {
        return invalid(format!("{} predictions for {} samples", preds.len(), samples.len()));
    }
    let mut flat_pred = Vec::new();
    let mut flat_gt = Vec::new();
    let mut refs = Vec::new();
    let mut oks_values = Vec::with_capacity(samples.len());
    for (p, s) in preds.iter().zip(samples) {
        if p.len() != s.gt.len() {
            return invalid(format!(
                "sample {} has {} keypoints, prediction {}",
                s.id,
                s.gt.len(),
                p.len()
            ));
        }
        let pred_pose = Pose::new(
            p.iter().map(|d| d.to_keypoint()).collect(),
            s.gt.object_scale(),
            s.gt.per_type_constants().to_vec(),
        )?;
        oks_values.push(oks(&pred_pose, &s.gt)?);
        for (d, g) in p.iter().zip(s.gt.keypoints()) {
            if g.visible {
                flat_pred.push(*d);
                flat_gt.push(*g);
                refs.push(s.gt.object_scale());
            }
        }
    }
    let errors: Vec<f64> = flat_pred
        .iter()
        .zip(&flat_gt)
        .map(|(p, g)| (p.x - g.x).hypot(p.y - g.y))
        .collect();
    let ap = average_precision(&MatchResult::new(oks_values))?;
    Ok(MetricsReport {
        ap: ap.ap,
        ar: ap.ar,
        ap50: ap.at(0.5).unwrap_or(f64::NAN),
        ap75: ap.at(0.75).unwrap_or(f64::NAN),
        pckh_01: pckh(&errors, &refs, 0.1)?,
        pckh_05: pckh(&errors, &refs, 0.5)?,
        mean_px_error: mean_px_error(&flat_pred, &flat_gt)?,
    })
}

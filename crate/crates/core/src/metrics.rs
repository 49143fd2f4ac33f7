//! Object keypoint similarity, single-instance AP/AR, PCKh and mean pixel
//! error.

use serde::{Deserialize, Serialize};

use crate::decode::DecodedKeypoint;
use crate::error::{invalid, Error, Result};
use crate::repr::{Keypoint, Pose};

/// Default per-type OKS falloff constant.
pub const DEFAULT_KEYPOINT_CONSTANT: f64 = 0.1;

/// The ten OKS thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// `sum_i exp(-d_i^2 / (2 s^2 j_i^2)) [v_i] / sum_i [v_i]` over the visible
/// ground-truth keypoints, with `s` and `j_i` taken from `gt`.
pub fn oks(pred: &Pose, gt: &Pose) -> Result<f64> {
    if pred.len() != gt.len() {
        return invalid(format!("pose sizes differ: {} vs {}", pred.len(), gt.len()));
    }
    let s2 = gt.object_scale() * gt.object_scale();
    let mut num = 0.0;
    let mut visible = 0usize;
    for ((p, g), j) in pred.keypoints().iter().zip(gt.keypoints()).zip(gt.per_type_constants()) {
        if !g.visible {
            continue;
        }
        let d2 = (p.x - g.x).powi(2) + (p.y - g.y).powi(2);
        num += (-d2 / (2.0 * s2 * j * j)).exp();
        visible += 1;
    }
    if visible == 0 {
        return Err(Error::UndefinedMetric("OKS needs at least one visible keypoint".into()));
    }
    Ok(num / visible as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    per_sample_oks: Vec<f64>,
    thresholds: Vec<f64>,
}

impl MatchResult {
    /// OKS values scored on the standard 0.50:0.05:0.95 grid.
    pub fn new(per_sample_oks: Vec<f64>) -> Self {
        Self {
            per_sample_oks,
            thresholds: coco_thresholds(),
        }
    }

    pub fn with_thresholds(per_sample_oks: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() || thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return invalid("thresholds must be non-empty and lie in (0, 1)");
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("thresholds must be strictly increasing");
        }
        Ok(Self {
            per_sample_oks,
            thresholds,
        })
    }

    pub fn per_sample_oks(&self) -> &[f64] {
        &self.per_sample_oks
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApSummary {
    pub ap: f64,
    pub ar: f64,
    /// `(threshold, precision)` pairs.
    pub per_threshold: Vec<(f64, f64)>,
}

impl ApSummary {
    /// Precision at exactly threshold `t`, if it is on the grid.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.per_threshold.iter().find(|(th, _)| *th == t).map(|(_, p)| *p)
    }
}

/// Single-instance AP: each sample has one prediction, counted correct at
/// threshold `t` when its OKS reaches `t`. Precision and recall coincide in
/// this regime; both are reported.
pub fn average_precision(results: &MatchResult) -> Result<ApSummary> {
    let n = results.per_sample_oks.len();
    if n == 0 {
        return invalid("average precision over zero samples");
    }
    let per_threshold: Vec<(f64, f64)> = results
        .thresholds
        .iter()
        .map(|&t| {
            let hits = results.per_sample_oks.iter().filter(|o| **o >= t).count();
            (t, hits as f64 / n as f64)
        })
        .collect();
    let ap = per_threshold.iter().map(|(_, p)| p).sum::<f64>() / per_threshold.len() as f64;
    Ok(ApSummary {
        ap,
        ar: ap,
        per_threshold,
    })
}

/// Fraction of entries with `error <= alpha * ref_length`.
pub fn pckh(errors: &[f64], ref_lengths: &[f64], alpha: f64) -> Result<f64> {
    if errors.len() != ref_lengths.len() {
        return invalid(format!(
            "{} errors but {} reference lengths",
            errors.len(),
            ref_lengths.len()
        ));
    }
    if errors.is_empty() {
        return invalid("PCKh over zero keypoints");
    }
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if ref_lengths.iter().any(|r| !(*r > 0.0)) {
        return invalid("reference lengths must be positive");
    }
    let hits = errors
        .iter()
        .zip(ref_lengths)
        .filter(|(e, r)| **e <= alpha * **r)
        .count();
    Ok(hits as f64 / errors.len() as f64)
}

/// Mean Euclidean distance between decoded and ground-truth positions.
pub fn mean_px_error(preds: &[DecodedKeypoint], gts: &[Keypoint]) -> Result<f64> {
    if preds.len() != gts.len() {
        return invalid(format!("{} predictions but {} ground truths", preds.len(), gts.len()));
    }
    if preds.is_empty() {
        return invalid("mean error over zero keypoints");
    }
    let total: f64 = preds.iter().zip(gts).map(|(p, g)| (p.x - g.x).hypot(p.y - g.y)).sum();
    Ok(total / preds.len() as f64)
}

/// Flat evaluation record, written as one CSV row or one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: f64,
    pub ar: f64,
    pub ap50: f64,
    pub ap75: f64,
    #[serde(rename = "pckh@0.1")]
    pub pckh_01: f64,
    #[serde(rename = "pckh@0.5")]
    pub pckh_05: f64,
    pub mean_px_error: f64,
}

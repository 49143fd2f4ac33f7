//! Training losses with analytic gradients and a central-difference checker.
//!
//! Classification losses take raw logits and fuse the softmax.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    CrossEntropy,
    KlDivergence,
    Mse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Gradient with respect to the prediction input (logits or grid values).
    pub grad: Vec<f64>,
}

fn check_shapes(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return invalid(format!("shape mismatch: {} vs {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return invalid("loss over an empty vector");
    }
    Ok(())
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// `log(softmax(logits))` without forming the probabilities first.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

fn softmax_minus(logits: &[f64], target: &[f64]) -> Vec<f64> {
    softmax(logits).iter().zip(target).map(|(p, t)| p - t).collect()
}

pub fn cross_entropy(logits: &[f64], target: &[f64]) -> Result<LossValue> {
    check_shapes(logits, target)?;
    let logp = log_softmax(logits);
    let value = -target.iter().zip(&logp).map(|(t, lp)| t * lp).sum::<f64>();
    Ok(LossValue {
        value,
        grad: softmax_minus(logits, target),
    })
}

/// `KL(target || softmax(logits))`; zero-mass target bins contribute nothing.
pub fn kl_divergence(logits: &[f64], target: &[f64]) -> Result<LossValue> {
    check_shapes(logits, target)?;
    let logp = log_softmax(logits);
    let value = target
        .iter()
        .zip(&logp)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, lp)| t * (t.ln() - lp))
        .sum::<f64>();
    Ok(LossValue {
        value,
        grad: softmax_minus(logits, target),
    })
}

/// Mean squared error over all elements.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<LossValue> {
    check_shapes(pred, target)?;
    let n = pred.len() as f64;
    let value = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok(LossValue { value, grad })
}

pub fn mse_grid(pred: &Grid, target: &Grid) -> Result<LossValue> {
    if pred.shape() != target.shape() {
        return invalid(format!(
            "grid shape mismatch: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        ));
    }
    mse(pred.as_slice(), target.as_slice())
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

pub fn loss(kind: LossKind, pred: &[f64], target: &[f64]) -> Result<LossValue> {
    match kind {
        LossKind::CrossEntropy => cross_entropy(pred, target),
        LossKind::KlDivergence => kl_divergence(pred, target),
        LossKind::Mse => mse(pred, target),
    }
}

/// Largest `|fd - analytic| / max(1, |analytic|)` over coordinates, where
/// `fd` is the central difference `(L(x + h e_i) - L(x - h e_i)) / 2h`.
pub fn grad_check(kind: LossKind, point: &[f64], target: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return invalid(format!("finite-difference step must be positive, got {h}"));
    }
    let analytic = loss(kind, point, target)?.grad;
    let mut probe = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        probe[i] = point[i] + h;
        let up = loss(kind, &probe, target)?.value;
        probe[i] = point[i] - h;
        let down = loss(kind, &probe, target)?.value;
        probe[i] = point[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - analytic[i]).abs() / analytic[i].abs().max(1.0));
    }
    Ok(worst)
}

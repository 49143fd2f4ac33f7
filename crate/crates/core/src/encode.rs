//! Supervision targets: 2D Gaussian heatmaps, one-hot 1D classification
//! vectors, label smoothing, and the space-aware Gaussian 1D vectors.
//!
//! Invisible keypoints always encode to all-zero targets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::repr::{quantize_coord, HeatmapConfig, Keypoint, PeakMode, SimDRConfig};

/// Standard deviation (in bins) of space-aware 1D targets.
pub const DEFAULT_SA_SIGMA: f64 = 2.0;

/// Label-smoothing mass for one-hot 1D targets.
pub const DEFAULT_SMOOTHING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    OneHot,
    Smoothed,
    SpaceAware,
}

/// Per-axis target vectors of lengths `width * k` and `height * k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDRTarget {
    pub x_vec: Vec<f64>,
    pub y_vec: Vec<f64>,
    pub kind: TargetKind,
}

impl SimDRTarget {
    /// `false` for the all-zero target of an invisible keypoint.
    pub fn is_supervised(&self) -> bool {
        self.x_vec.iter().any(|v| *v != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapTarget {
    pub grid: Grid,
    pub config: HeatmapConfig,
}

/// Gaussian bump centred at `(x / lambda, y / lambda)` in heatmap cells.
pub fn encode_heatmap(kp: &Keypoint, cfg: &HeatmapConfig) -> Result<HeatmapTarget> {
    let (rows, cols) = (cfg.rows(), cfg.cols());
    if !kp.visible {
        return Ok(HeatmapTarget {
            grid: Grid::zeros(rows, cols),
            config: *cfg,
        });
    }
    kp.check_in(cfg.dims())?;
    let lambda = cfg.lambda() as f64;
    let (mu_x, mu_y) = (kp.x / lambda, kp.y / lambda);
    let two_var = 2.0 * cfg.sigma() * cfg.sigma();
    let scale = heatmap_peak(cfg);
    let grid = Grid::from_fn(rows, cols, |j, i| {
        let dx = i as f64 - mu_x;
        let dy = j as f64 - mu_y;
        scale * (-(dx * dx + dy * dy) / two_var).exp()
    });
    Ok(HeatmapTarget { grid, config: *cfg })
}

/// Value the heatmap takes exactly at its centre.
pub fn heatmap_peak(cfg: &HeatmapConfig) -> f64 {
    match cfg.peak_mode() {
        PeakMode::Normalized => 1.0 / (2.0 * PI * cfg.sigma() * cfg.sigma()),
        PeakMode::PeakOne => 1.0,
    }
}

/// One axis factor of the separable heatmap Gaussian:
/// `exp(-(i - mu)^2 / (2 sigma^2))` for `i in 0..n`.
///
/// The 2D grid is the outer product of the two axis profiles (up to the peak
/// constant), so its argmax is the pair of axis argmaxes.
pub fn heatmap_axis_profile(mu: f64, n: usize, sigma: f64) -> Vec<f64> {
    let two_var = 2.0 * sigma * sigma;
    (0..n)
        .map(|i| {
            let d = i as f64 - mu;
            (-(d * d) / two_var).exp()
        })
        .collect()
}

fn one_hot(n: usize, idx: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[idx] = 1.0;
    v
}

pub fn encode_simdr(kp: &Keypoint, cfg: &SimDRConfig) -> Result<SimDRTarget> {
    let (nx, ny) = (cfg.x_len(), cfg.y_len());
    if !kp.visible {
        return Ok(SimDRTarget {
            x_vec: vec![0.0; nx],
            y_vec: vec![0.0; ny],
            kind: TargetKind::OneHot,
        });
    }
    kp.check_in(cfg.dims())?;
    let ix = quantize_coord(kp.x, cfg.k(), nx)?;
    let iy = quantize_coord(kp.y, cfg.k(), ny)?;
    Ok(SimDRTarget {
        x_vec: one_hot(nx, ix),
        y_vec: one_hot(ny, iy),
        kind: TargetKind::OneHot,
    })
}

/// Mixes a one-hot target with the uniform distribution:
/// `q_i = (1 - eps) * [i == t] + eps / N`.
pub fn smooth_labels(t: &SimDRTarget, epsilon: f64) -> Result<SimDRTarget> {
    if t.kind != TargetKind::OneHot {
        return invalid(format!("label smoothing needs a one-hot target, got {:?}", t.kind));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return invalid(format!("smoothing epsilon must be in [0, 1), got {epsilon}"));
    }
    let smooth = |v: &[f64]| -> Vec<f64> {
        if v.iter().all(|x| *x == 0.0) {
            return v.to_vec();
        }
        let floor = epsilon / v.len() as f64;
        v.iter().map(|x| (1.0 - epsilon) * x + floor).collect()
    };
    Ok(SimDRTarget {
        x_vec: smooth(&t.x_vec),
        y_vec: smooth(&t.y_vec),
        kind: TargetKind::Smoothed,
    })
}

/// Space-aware targets: a 1D Gaussian density of std-dev `sigma` bins centred
/// at the quantized index on each axis. With `renormalize` each vector is
/// divided by its sum so it is a proper distribution.
pub fn encode_simdr_sa(kp: &Keypoint, cfg: &SimDRConfig, sigma: f64, renormalize: bool) -> Result<SimDRTarget> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("space-aware sigma must be positive, got {sigma}"));
    }
    let (nx, ny) = (cfg.x_len(), cfg.y_len());
    if !kp.visible {
        return Ok(SimDRTarget {
            x_vec: vec![0.0; nx],
            y_vec: vec![0.0; ny],
            kind: TargetKind::SpaceAware,
        });
    }
    kp.check_in(cfg.dims())?;
    let ix = quantize_coord(kp.x, cfg.k(), nx)?;
    let iy = quantize_coord(kp.y, cfg.k(), ny)?;
    Ok(SimDRTarget {
        x_vec: gaussian_1d(nx, ix, sigma, renormalize),
        y_vec: gaussian_1d(ny, iy, sigma, renormalize),
        kind: TargetKind::SpaceAware,
    })
}

fn gaussian_1d(n: usize, center: usize, sigma: f64, renormalize: bool) -> Vec<f64> {
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
    let two_var = 2.0 * sigma * sigma;
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let d = i as f64 - center as f64;
            norm * (-(d * d) / two_var).exp()
        })
        .collect();
    if renormalize {
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= sum);
    }
    v
}

/// Index of the largest entry, lowest index on ties. `None` for empty input.
pub(crate) fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

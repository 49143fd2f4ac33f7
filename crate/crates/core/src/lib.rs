//! Keypoint coordinate representations and the tooling to audit them.
//!
//! Two ways of encoding a keypoint location for a classifier are provided:
//! a 2D Gaussian heatmap on a grid downsampled by `lambda`, and a pair of 1D
//! classification vectors per axis with `k` bins per pixel. Around them sit
//! the decoders, losses with analytic gradients, quantization-error audits,
//! pose metrics (OKS, AP, PCKh) and a small linear model for toy experiments.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decode;
pub mod encode;
pub mod error;
pub mod grid;
pub mod loss;
pub mod metrics;
pub mod quantization;
pub mod repr;
pub mod rng;
pub mod toy;

pub use decode::{decode_heatmap, decode_heatmap_grid, decode_simdr, DecodedKeypoint};
pub use encode::{
    encode_heatmap, encode_simdr, encode_simdr_sa, smooth_labels, HeatmapTarget, SimDRTarget, TargetKind,
};
pub use error::{Error, Result};
pub use grid::Grid;
pub use loss::{cross_entropy, grad_check, kl_divergence, mse, softmax, LossKind, LossValue};
pub use metrics::{average_precision, mean_px_error, oks, pckh, ApSummary, MatchResult, MetricsReport};
pub use quantization::{
    audit_keypoints, audit_roundtrip, heatmap_error_bound, representation_cost, simdr_error_bound, AuditRow,
    CostReport, ErrorStats, SamplingRange, Scheme,
};
pub use repr::{dequantize_coord, quantize_coord, HeatmapConfig, ImageDims, Keypoint, PeakMode, Pose, SimDRConfig};

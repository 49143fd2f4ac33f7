//! Domain types shared by every encoder and decoder, plus the coordinate
//! quantization used by the 1D classification representation.
//!
//! A continuous coordinate `v` is mapped onto bin `round(v * k)` where `k` is
//! the splitting factor; decoding divides the bin index by `k` again. Rounding
//! is half-up and indices are clamped into `[0, n_bins - 1]`, so a keypoint on
//! the extreme right or bottom edge still lands in the last bin.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    width: u32,
    height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return invalid(format!("image dims must be positive, got {width}x{height}"));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn area(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// `true` if `(x, y)` lies in `[0, width) x [0, height)`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }
}

/// Parses `HEIGHTxWIDTH`, the usual way pose-estimation input sizes are
/// written (`256x192` is 256 rows by 192 columns).
impl FromStr for ImageDims {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::InvalidArgument(format!("dims `{s}` must look like HxW")))?;
        let parse = |part: &str| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidArgument(format!("bad dimension `{part}` in `{s}`")))
        };
        ImageDims::new(parse(w)?, parse(h)?)
    }
}

impl fmt::Display for ImageDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Keypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, visible: true }
    }

    pub fn invisible(x: f64, y: f64) -> Self {
        Self { x, y, visible: false }
    }

    pub(crate) fn check_in(&self, dims: ImageDims) -> Result<()> {
        if !dims.contains(self.x, self.y) {
            return invalid(format!(
                "keypoint ({}, {}) outside {}x{} image",
                self.x,
                self.y,
                dims.width(),
                dims.height()
            ));
        }
        Ok(())
    }
}

/// All keypoints of one instance, with the object scale `s` and the
/// per-type falloff constants used by OKS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    keypoints: Vec<Keypoint>,
    object_scale: f64,
    per_type_constants: Vec<f64>,
}

impl Pose {
    pub fn new(keypoints: Vec<Keypoint>, object_scale: f64, per_type_constants: Vec<f64>) -> Result<Self> {
        if keypoints.len() != per_type_constants.len() {
            return invalid(format!(
                "{} keypoints but {} per-type constants",
                keypoints.len(),
                per_type_constants.len()
            ));
        }
        if !(object_scale > 0.0 && object_scale.is_finite()) {
            return invalid(format!("object scale must be positive, got {object_scale}"));
        }
        if let Some(c) = per_type_constants.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return invalid(format!("per-type constants must be positive, got {c}"));
        }
        Ok(Self {
            keypoints,
            object_scale,
            per_type_constants,
        })
    }

    /// Pose with the same constant for every keypoint type.
    pub fn uniform(keypoints: Vec<Keypoint>, object_scale: f64, constant: f64) -> Result<Self> {
        let n = keypoints.len();
        Self::new(keypoints, object_scale, vec![constant; n])
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }

    pub fn object_scale(&self) -> f64 {
        self.object_scale
    }

    pub fn per_type_constants(&self) -> &[f64] {
        &self.per_type_constants
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

/// Splitting factor `k` together with the image it applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimDRConfig {
    k: u32,
    dims: ImageDims,
}

impl SimDRConfig {
    pub fn new(k: u32, dims: ImageDims) -> Result<Self> {
        if k == 0 {
            return invalid("splitting factor k must be >= 1");
        }
        Ok(Self { k, dims })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn x_len(&self) -> usize {
        self.dims.width as usize * self.k as usize
    }

    pub fn y_len(&self) -> usize {
        self.dims.height as usize * self.k as usize
    }
}

/// Scale constant of the heatmap Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PeakMode {
    /// `1 / (2 pi sigma^2)`, the normalized bivariate density.
    Normalized,
    /// Peak value 1.
    #[default]
    PeakOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapConfig {
    lambda: u32,
    sigma: f64,
    dims: ImageDims,
    peak_mode: PeakMode,
}

impl HeatmapConfig {
    pub fn new(lambda: u32, sigma: f64, dims: ImageDims, peak_mode: PeakMode) -> Result<Self> {
        check_lambda(lambda, dims)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("heatmap sigma must be positive, got {sigma}"));
        }
        Ok(Self {
            lambda,
            sigma,
            dims,
            peak_mode,
        })
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn peak_mode(&self) -> PeakMode {
        self.peak_mode
    }

    /// Heatmap columns, `width / lambda`.
    pub fn cols(&self) -> usize {
        (self.dims.width / self.lambda) as usize
    }

    /// Heatmap rows, `height / lambda`.
    pub fn rows(&self) -> usize {
        (self.dims.height / self.lambda) as usize
    }
}

pub(crate) fn check_lambda(lambda: u32, dims: ImageDims) -> Result<()> {
    if lambda == 0 {
        return invalid("downsampling ratio lambda must be >= 1");
    }
    if !dims.width.is_multiple_of(lambda) || !dims.height.is_multiple_of(lambda) {
        return invalid(format!("dims {dims} not divisible by lambda {lambda}"));
    }
    Ok(())
}

/// Bin index of coordinate `v` at splitting factor `k`: `round(v * k)`,
/// rounding half up, clamped to `[0, n_bins - 1]`.
pub fn quantize_coord(v: f64, k: u32, n_bins: usize) -> Result<usize> {
    if !(v >= 0.0) || !v.is_finite() {
        return invalid(format!("coordinate must be finite and non-negative, got {v}"));
    }
    if k == 0 {
        return invalid("splitting factor k must be >= 1");
    }
    if n_bins == 0 {
        return invalid("n_bins must be >= 1");
    }
    let idx = (v * k as f64 + 0.5).floor();
    Ok((idx as usize).min(n_bins - 1))
}

/// Continuous coordinate of bin `idx`: `idx / k`.
pub fn dequantize_coord(idx: usize, k: u32) -> f64 {
    idx as f64 / k as f64
}

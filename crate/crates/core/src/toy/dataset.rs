use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::metrics::DEFAULT_KEYPOINT_CONSTANT;
use crate::repr::{ImageDims, Keypoint, Pose};
use crate::rng::sub_rng;

/// Grayscale image with rendered keypoint blobs and its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    /// `height x width`, intensities in `[0, 1]` on the 8-bit lattice `i / 255`.
    pub image: Grid,
    pub gt: Pose,
    pub id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dims: ImageDims,
    n_keypoints: usize,
    samples: Vec<SyntheticSample>,
}

impl Dataset {
    pub fn new(dims: ImageDims, n_keypoints: usize, samples: Vec<SyntheticSample>) -> Result<Self> {
        for s in &samples {
            if s.image.shape() != (dims.height() as usize, dims.width() as usize) {
                return invalid(format!(
                    "sample {} image is {:?}, dataset is {dims}",
                    s.id,
                    s.image.shape()
                ));
            }
            if s.gt.len() != n_keypoints {
                return invalid(format!(
                    "sample {} has {} keypoints, expected {n_keypoints}",
                    s.id,
                    s.gt.len()
                ));
            }
            if let Some(kp) = s.gt.keypoints().iter().find(|kp| !dims.contains(kp.x, kp.y)) {
                return invalid(format!("sample {} keypoint ({}, {}) outside image", s.id, kp.x, kp.y));
            }
        }
        Ok(Self {
            dims,
            n_keypoints,
            samples,
        })
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn n_keypoints(&self) -> usize {
        self.n_keypoints
    }

    pub fn samples(&self) -> &[SyntheticSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Ground-truth pose for a synthetic image: object scale `sqrt(W * H)` and the
/// default per-type constant.
pub fn synthetic_pose(dims: ImageDims, keypoints: Vec<Keypoint>) -> Result<Pose> {
    Pose::uniform(keypoints, (dims.area() as f64).sqrt(), DEFAULT_KEYPOINT_CONSTANT)
}

/// Blob amplitude of keypoint type `p`; types get distinct brightness.
pub fn keypoint_amplitude(p: usize) -> f64 {
    1.0 / (p as f64 + 1.0)
}

/// Random images with `n_keypoints` Gaussian blobs each, keypoints uniform over
/// `[0, W - 1) x [0, H - 1)`, uniform noise in `[-noise, noise]`, clamped to
/// `[0, 1]` and stored on the 8-bit lattice.
pub fn gen_dataset(
    n: usize,
    dims: ImageDims,
    n_keypoints: usize,
    blob_sigma: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    gen_dataset_stream(n, dims, n_keypoints, blob_sigma, noise, seed, "dataset")
}

/// [`gen_dataset`] drawing from the named random stream `stream` of `seed`.
pub fn gen_dataset_stream(
    n: usize,
    dims: ImageDims,
    n_keypoints: usize,
    blob_sigma: f64,
    noise: f64,
    seed: u64,
    stream: &str,
) -> Result<Dataset> {
    if n == 0 {
        return invalid("dataset must contain at least one sample");
    }
    if n_keypoints == 0 {
        return invalid("samples need at least one keypoint");
    }
    if !(blob_sigma > 0.0 && blob_sigma.is_finite()) {
        return invalid(format!("blob sigma must be positive, got {blob_sigma}"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return invalid(format!("noise amplitude must be non-negative, got {noise}"));
    }
    let mut rng = sub_rng(seed, stream);
    let (w, h) = (dims.width() as usize, dims.height() as usize);
    let span = |extent: usize| (extent as f64 - 1.0).max(0.0);
    let two_var = 2.0 * blob_sigma * blob_sigma;
    let mut samples = Vec::with_capacity(n);
    for id in 0..n {
        let keypoints: Vec<Keypoint> = (0..n_keypoints)
            .map(|_| {
                let x = if span(w) > 0.0 {
                    rng.gen_range(0.0..span(w))
                } else {
                    0.0
                };
                let y = if span(h) > 0.0 {
                    rng.gen_range(0.0..span(h))
                } else {
                    0.0
                };
                Keypoint::new(x, y)
            })
            .collect();
        let mut image = Grid::from_fn(h, w, |r, c| {
            keypoints
                .iter()
                .enumerate()
                .map(|(p, kp)| {
                    let d2 = (c as f64 - kp.x).powi(2) + (r as f64 - kp.y).powi(2);
                    keypoint_amplitude(p) * (-d2 / two_var).exp()
                })
                .sum()
        });
        for v in image.as_mut_slice() {
            if noise > 0.0 {
                *v += rng.gen_range(-noise..=noise);
            }
            *v = to_byte(*v) as f64 / 255.0;
        }
        samples.push(SyntheticSample {
            image,
            gt: synthetic_pose(dims, keypoints)?,
            id: id as u64,
        });
    }
    Dataset::new(dims, n_keypoints, samples).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("generated dataset invalid: {m}")),
        other => other,
    })
}

pub(crate) fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

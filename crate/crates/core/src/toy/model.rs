//! Linear map from a flattened image to representation logits.
//!
//! Every keypoint's outputs come from the same flattened-image embedding. For
//! the 1D head each keypoint owns a block `[x logits (W*k) | y logits (H*k)]`;
//! for the heatmap head it owns a `(H/lambda) x (W/lambda)` block.

use serde::{Deserialize, Serialize};

use crate::encode::{encode_heatmap, encode_simdr, encode_simdr_sa, smooth_labels};
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::loss::{loss, LossKind};
use crate::repr::{HeatmapConfig, ImageDims, PeakMode, SimDRConfig};

use super::dataset::SyntheticSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Head {
    SimDR { k: u32 },
    Heatmap { lambda: u32, sigma: f64 },
}

impl Head {
    pub fn name(&self) -> &'static str {
        match self {
            Head::SimDR { .. } => "simdr",
            Head::Heatmap { .. } => "heatmap",
        }
    }

    /// `k` or `lambda`.
    pub fn param(&self) -> u32 {
        match *self {
            Head::SimDR { k } => k,
            Head::Heatmap { lambda, .. } => lambda,
        }
    }

    pub fn outputs_per_keypoint(&self, dims: ImageDims) -> usize {
        match *self {
            Head::SimDR { k } => k as usize * (dims.width() + dims.height()) as usize,
            Head::Heatmap { lambda, .. } => ((dims.width() / lambda) * (dims.height() / lambda)) as usize,
        }
    }

    fn validate(&self, dims: ImageDims) -> Result<()> {
        match *self {
            Head::SimDR { k } => SimDRConfig::new(k, dims).map(|_| ()),
            Head::Heatmap { lambda, sigma } => HeatmapConfig::new(lambda, sigma, dims, PeakMode::PeakOne).map(|_| ()),
        }
    }

    /// Whether `kind` is a valid training loss for this head.
    pub fn accepts(&self, kind: LossKind) -> bool {
        matches!(
            (self, kind),
            (Head::SimDR { .. }, LossKind::CrossEntropy | LossKind::KlDivergence)
                | (Head::Heatmap { .. }, LossKind::Mse)
        )
    }
}

/// Raw outputs for one image.
#[derive(Debug, Clone, PartialEq)]
pub enum Logits {
    /// `(x logits, y logits)` per keypoint.
    SimDR(Vec<(Vec<f64>, Vec<f64>)>),
    Heatmap(Vec<Grid>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    dims: ImageDims,
    n_keypoints: usize,
    head: Head,
    /// `output_size x input_size`, row-major.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// Gradient of a loss with respect to every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Flattened training targets for one sample, laid out like the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTargets {
    pub values: Vec<f64>,
    pub visible: Vec<bool>,
}

/// How targets are built for each loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetParams {
    /// Label smoothing for one-hot targets under cross-entropy.
    pub label_smoothing: f64,
    /// Std-dev in bins of space-aware targets under KL.
    pub sa_sigma: f64,
}

impl Default for TargetParams {
    fn default() -> Self {
        Self {
            label_smoothing: crate::encode::DEFAULT_SMOOTHING,
            sa_sigma: crate::encode::DEFAULT_SA_SIGMA,
        }
    }
}

impl ToyModel {
    /// All-zero weights and biases.
    pub fn zeros(dims: ImageDims, n_keypoints: usize, head: Head) -> Result<Self> {
        head.validate(dims)?;
        if n_keypoints == 0 {
            return invalid("model needs at least one keypoint");
        }
        let out = n_keypoints * head.outputs_per_keypoint(dims);
        Ok(Self {
            dims,
            n_keypoints,
            head,
            weights: vec![0.0; out * dims.area()],
            biases: vec![0.0; out],
        })
    }

    pub fn from_parts(
        dims: ImageDims,
        n_keypoints: usize,
        head: Head,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        let mut m = Self::zeros(dims, n_keypoints, head)?;
        if weights.len() != m.weights.len() || biases.len() != m.biases.len() {
            return invalid(format!(
                "parameter sizes {}/{} do not match {}x{} model",
                weights.len(),
                biases.len(),
                m.output_size(),
                m.input_size()
            ));
        }
        m.weights = weights;
        m.biases = biases;
        Ok(m)
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn n_keypoints(&self) -> usize {
        self.n_keypoints
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_size(&self) -> usize {
        self.dims.area()
    }

    pub fn output_size(&self) -> usize {
        self.biases.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn check_image(&self, image: &Grid) -> Result<()> {
        let want = (self.dims.height() as usize, self.dims.width() as usize);
        if image.shape() != want {
            return invalid(format!("image is {:?}, model expects {:?}", image.shape(), want));
        }
        Ok(())
    }

    /// `weights * flatten(image) + biases`.
    pub fn forward_flat(&self, image: &Grid) -> Result<Vec<f64>> {
        self.check_image(image)?;
        let x = image.as_slice();
        let n_in = x.len();
        Ok(self
            .weights
            .chunks_exact(n_in)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect())
    }

    pub fn forward(&self, image: &Grid) -> Result<Logits> {
        let flat = self.forward_flat(image)?;
        Ok(self.split(flat))
    }

    fn split(&self, flat: Vec<f64>) -> Logits {
        let per = self.head.outputs_per_keypoint(self.dims);
        match self.head {
            Head::SimDR { k } => {
                let nx = self.dims.width() as usize * k as usize;
                Logits::SimDR(
                    flat.chunks_exact(per)
                        .map(|block| (block[..nx].to_vec(), block[nx..].to_vec()))
                        .collect(),
                )
            }
            Head::Heatmap { lambda, .. } => {
                let rows = (self.dims.height() / lambda) as usize;
                let cols = (self.dims.width() / lambda) as usize;
                Logits::Heatmap(
                    flat.chunks_exact(per)
                        .map(|block| Grid::from_vec(rows, cols, block.to_vec()).expect("block size"))
                        .collect(),
                )
            }
        }
    }

    /// Encodes the ground truth of `sample` with the target generator that
    /// matches `kind`.
    pub fn targets(&self, sample: &SyntheticSample, kind: LossKind, params: &TargetParams) -> Result<SampleTargets> {
        if !self.head.accepts(kind) {
            return invalid(format!("loss {kind:?} does not fit a {} head", self.head.name()));
        }
        if sample.gt.len() != self.n_keypoints {
            return invalid(format!(
                "sample has {} keypoints, model {}",
                sample.gt.len(),
                self.n_keypoints
            ));
        }
        let mut values = Vec::with_capacity(self.output_size());
        let mut visible = Vec::with_capacity(self.n_keypoints);
        for kp in sample.gt.keypoints() {
            visible.push(kp.visible);
            match self.head {
                Head::SimDR { k } => {
                    let cfg = SimDRConfig::new(k, self.dims)?;
                    let t = match kind {
                        LossKind::KlDivergence => encode_simdr_sa(kp, &cfg, params.sa_sigma, true)?,
                        _ => smooth_labels(&encode_simdr(kp, &cfg)?, params.label_smoothing)?,
                    };
                    values.extend_from_slice(&t.x_vec);
                    values.extend_from_slice(&t.y_vec);
                }
                Head::Heatmap { lambda, sigma } => {
                    let cfg = HeatmapConfig::new(lambda, sigma, self.dims, PeakMode::PeakOne)?;
                    values.extend_from_slice(encode_heatmap(kp, &cfg)?.grid.as_slice());
                }
            }
        }
        Ok(SampleTargets { values, visible })
    }

    /// Loss of one sample and its gradient with respect to the flat logits.
    ///
    /// The two 1D losses of a keypoint are summed; keypoint losses are then
    /// averaged over the visible keypoints.
    pub fn sample_loss(&self, image: &Grid, targets: &SampleTargets, kind: LossKind) -> Result<(f64, Vec<f64>)> {
        if !self.head.accepts(kind) {
            return invalid(format!("loss {kind:?} does not fit a {} head", self.head.name()));
        }
        let logits = self.forward_flat(image)?;
        if targets.values.len() != logits.len() || targets.visible.len() != self.n_keypoints {
            return invalid("targets do not match the model layout");
        }
        let per = self.head.outputs_per_keypoint(self.dims);
        let n_visible = targets.visible.iter().filter(|v| **v).count();
        let mut grad = vec![0.0; logits.len()];
        if n_visible == 0 {
            return Ok((0.0, grad));
        }
        let scale = 1.0 / n_visible as f64;
        let mut total = 0.0;
        for (p, vis) in targets.visible.iter().enumerate() {
            if !vis {
                continue;
            }
            let range = p * per..(p + 1) * per;
            let (z, t) = (&logits[range.clone()], &targets.values[range.clone()]);
            let g = &mut grad[range];
            let parts: Vec<(usize, usize)> = match self.head {
                Head::SimDR { k } => {
                    let nx = self.dims.width() as usize * k as usize;
                    vec![(0, nx), (nx, per)]
                }
                Head::Heatmap { .. } => vec![(0, per)],
            };
            for (a, b) in parts {
                let l = loss(kind, &z[a..b], &t[a..b])?;
                total += l.value * scale;
                for (gi, li) in g[a..b].iter_mut().zip(&l.grad) {
                    *gi = li * scale;
                }
            }
        }
        Ok((total, grad))
    }

    /// Mean loss over a batch and its gradient with respect to every parameter.
    pub fn batch_gradient(&self, batch: &[(&Grid, &SampleTargets)], kind: LossKind) -> Result<(f64, ModelGrad)> {
        if batch.is_empty() {
            return invalid("empty batch");
        }
        let n_in = self.input_size();
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.biases.len()];
        let mut total = 0.0;
        for (image, targets) in batch {
            let (l, g) = self.sample_loss(image, targets, kind)?;
            total += l;
            let x = image.as_slice();
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                gb[o] += go;
                for (w, v) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *w += go * v;
                }
            }
        }
        let inv = 1.0 / batch.len() as f64;
        gw.iter_mut().for_each(|g| *g *= inv);
        gb.iter_mut().for_each(|g| *g *= inv);
        Ok((
            total * inv,
            ModelGrad {
                weights: gw,
                biases: gb,
            },
        ))
    }

    /// Mean loss over a batch without gradients.
    pub fn batch_loss(&self, batch: &[(&Grid, &SampleTargets)], kind: LossKind) -> Result<f64> {
        if batch.is_empty() {
            return invalid("empty batch");
        }
        let mut total = 0.0;
        for (image, targets) in batch {
            total += self.sample_loss(image, targets, kind)?.0;
        }
        Ok(total / batch.len() as f64)
    }
}

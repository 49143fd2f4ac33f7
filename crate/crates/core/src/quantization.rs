//! Quantization-error bounds for both representations, Monte-Carlo audits
//! that check them, and element-count accounting.
//!
//! A 1D classification vector with splitting factor `k` recovers a coordinate
//! to within `1 / (2k)` pixels; a heatmap downsampled by `lambda` recovers it
//! to within `lambda / 2` pixels. Both bounds are treated as inclusive.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::decode_simdr;
use crate::encode::{argmax, encode_simdr, heatmap_axis_profile};
use crate::error::{invalid, Result};
use crate::repr::{check_lambda, ImageDims, Keypoint, SimDRConfig};
use crate::rng::sub_rng;

/// Fixed number of histogram bins over `[0, bound]`.
pub const HISTOGRAM_BINS: usize = 20;

/// Heatmap sigma used when the audit builds its ground-truth targets. The
/// argmax does not depend on it.
pub const AUDIT_HEATMAP_SIGMA: f64 = 2.0;

const CHUNK: usize = 4096;

pub fn simdr_error_bound(k: u32) -> f64 {
    1.0 / (2.0 * k as f64)
}

pub fn heatmap_error_bound(lambda: u32) -> f64 {
    lambda as f64 / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    SimDR { k: u32 },
    Heatmap { lambda: u32 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::SimDR { .. } => "simdr",
            Scheme::Heatmap { .. } => "heatmap",
        }
    }

    /// `k` or `lambda`.
    pub fn param(&self) -> u32 {
        match *self {
            Scheme::SimDR { k } => k,
            Scheme::Heatmap { lambda } => lambda,
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            Scheme::SimDR { k } => simdr_error_bound(k),
            Scheme::Heatmap { lambda } => heatmap_error_bound(lambda),
        }
    }

    fn validate(&self, dims: ImageDims) -> Result<()> {
        match *self {
            Scheme::SimDR { k } => SimDRConfig::new(k, dims).map(|_| ()),
            Scheme::Heatmap { lambda } => check_lambda(lambda, dims),
        }
    }
}

/// Where audit keypoints are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SamplingRange {
    /// Away from the right/bottom edge, so no sample is clamped into the last
    /// bin: `[0, W - 1)` for 1D vectors and `[0, min(W - 1, W - lambda/2))`
    /// for heatmaps (likewise for `H`).
    #[default]
    Interior,
    /// The whole image `[0, W) x [0, H)`, exposing clamp-induced error.
    EdgeInclusive,
}

impl SamplingRange {
    fn upper(&self, scheme: Scheme, extent: u32) -> f64 {
        let extent = extent as f64;
        match (self, scheme) {
            (SamplingRange::EdgeInclusive, _) => extent,
            (SamplingRange::Interior, Scheme::SimDR { .. }) => extent - 1.0,
            (SamplingRange::Interior, Scheme::Heatmap { lambda }) => (extent - 1.0).min(extent - lambda as f64 / 2.0),
        }
    }
}

/// Summary of per-axis absolute roundtrip errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Keypoints audited; each contributes one x and one y error.
    pub n_samples: usize,
    pub max_err: f64,
    pub mean_err: f64,
    pub bound: f64,
    /// Counts over `HISTOGRAM_BINS` equal-width bins of `[0, bound]`.
    pub histogram: Vec<u64>,
    /// Errors strictly above the bound (possible only with edge sampling).
    pub above_bound: u64,
}

impl ErrorStats {
    pub fn within_bound(&self) -> bool {
        self.max_err <= self.bound
    }
}

/// One CSV/JSON row of an audit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub scheme: String,
    pub param: u32,
    pub width: u32,
    pub height: u32,
    pub n: usize,
    pub max_err: f64,
    pub mean_err: f64,
    pub bound: f64,
}

impl AuditRow {
    pub fn new(scheme: Scheme, dims: ImageDims, stats: &ErrorStats) -> Self {
        Self {
            scheme: scheme.name().to_string(),
            param: scheme.param(),
            width: dims.width(),
            height: dims.height(),
            n: stats.n_samples,
            max_err: stats.max_err,
            mean_err: stats.mean_err,
            bound: stats.bound,
        }
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    n: usize,
    sum: f64,
    max: f64,
    histogram: Vec<u64>,
    above: u64,
    bound: f64,
}

impl Accumulator {
    fn new(bound: f64) -> Self {
        Self {
            n: 0,
            sum: 0.0,
            max: 0.0,
            histogram: vec![0; HISTOGRAM_BINS],
            above: 0,
            bound,
        }
    }

    fn push(&mut self, err: f64) {
        self.sum += err;
        self.max = self.max.max(err);
        if err > self.bound {
            self.above += 1;
        } else {
            let bin = ((err / self.bound) * HISTOGRAM_BINS as f64) as usize;
            self.histogram[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
    }

    fn merge(mut self, other: Accumulator) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.max = self.max.max(other.max);
        self.above += other.above;
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self
    }

    fn finish(self) -> ErrorStats {
        let axis_count = 2 * self.n;
        ErrorStats {
            n_samples: self.n,
            max_err: self.max,
            mean_err: if axis_count == 0 {
                0.0
            } else {
                self.sum / axis_count as f64
            },
            bound: self.bound,
            histogram: self.histogram,
            above_bound: self.above,
        }
    }
}

/// Encodes `kp` with the exact ground-truth target of `scheme`, decodes it by
/// plain argmax and returns the decoded position in pixels.
fn roundtrip(scheme: Scheme, dims: ImageDims, kp: &Keypoint) -> Result<(f64, f64)> {
    match scheme {
        Scheme::SimDR { k } => {
            let cfg = SimDRConfig::new(k, dims)?;
            let t = encode_simdr(kp, &cfg)?;
            let d = decode_simdr(&t.x_vec, &t.y_vec, k)?;
            Ok((d.x, d.y))
        }
        Scheme::Heatmap { lambda } => {
            kp.check_in(dims)?;
            // The isotropic Gaussian factorizes, so the 2D argmax is the pair
            // of per-axis argmaxes.
            let l = lambda as f64;
            let cols = (dims.width() / lambda) as usize;
            let rows = (dims.height() / lambda) as usize;
            let px = heatmap_axis_profile(kp.x / l, cols, AUDIT_HEATMAP_SIGMA);
            let py = heatmap_axis_profile(kp.y / l, rows, AUDIT_HEATMAP_SIGMA);
            let ix = argmax(&px).expect("non-empty heatmap axis");
            let iy = argmax(&py).expect("non-empty heatmap axis");
            Ok((ix as f64 * l, iy as f64 * l))
        }
    }
}

/// Roundtrip error statistics for a fixed set of keypoints.
pub fn audit_keypoints(scheme: Scheme, dims: ImageDims, keypoints: &[Keypoint]) -> Result<ErrorStats> {
    scheme.validate(dims)?;
    let mut acc = Accumulator::new(scheme.bound());
    for kp in keypoints {
        let (x, y) = roundtrip(scheme, dims, kp)?;
        acc.n += 1;
        acc.push((x - kp.x).abs());
        acc.push((y - kp.y).abs());
    }
    Ok(acc.finish())
}

/// Monte-Carlo audit over `n` uniformly drawn keypoints.
///
/// Samples are split into fixed-size chunks, each with its own named random
/// stream, and chunk results are merged in chunk order, so the output depends
/// only on the arguments and not on thread scheduling.
pub fn audit_roundtrip(
    scheme: Scheme,
    dims: ImageDims,
    n: usize,
    seed: u64,
    range: SamplingRange,
) -> Result<ErrorStats> {
    if n == 0 {
        return invalid("audit needs at least one sample");
    }
    scheme.validate(dims)?;
    let ux = range.upper(scheme, dims.width());
    let uy = range.upper(scheme, dims.height());
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<Accumulator>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = sub_rng(seed, &format!("audit/{}/{}/{c}", scheme.name(), scheme.param()));
            let mut acc = Accumulator::new(scheme.bound());
            let len = CHUNK.min(n - c * CHUNK);
            for _ in 0..len {
                let x = if ux > 0.0 { rng.gen_range(0.0..ux) } else { 0.0 };
                let y = if uy > 0.0 { rng.gen_range(0.0..uy) } else { 0.0 };
                let kp = Keypoint::new(x, y);
                let (dx, dy) = roundtrip(scheme, dims, &kp)?;
                acc.n += 1;
                acc.push((dx - x).abs());
                acc.push((dy - y).abs());
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::new(scheme.bound());
    for part in parts {
        total = total.merge(part?);
    }
    Ok(total.finish())
}

/// Output element counts of the two representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    /// `k * (W + H)`
    pub simdr_elements: u64,
    /// `(W / lambda) * (H / lambda)`
    pub heatmap_elements: u64,
}

pub fn representation_cost(dims: ImageDims, k: u32, lambda: u32) -> Result<CostReport> {
    SimDRConfig::new(k, dims)?;
    check_lambda(lambda, dims)?;
    let (w, h) = (dims.width() as u64, dims.height() as u64);
    let l = lambda as u64;
    Ok(CostReport {
        simdr_elements: k as u64 * (w + h),
        heatmap_elements: (w / l) * (h / l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::decode_heatmap;
    use crate::encode::encode_heatmap;
    use crate::repr::{HeatmapConfig, PeakMode};

    fn dims(w: u32, h: u32) -> ImageDims {
        ImageDims::new(w, h).unwrap()
    }

    #[test]
    fn bounds() {
        assert_eq!(simdr_error_bound(2), 0.25);
        assert_eq!(simdr_error_bound(1), 0.5);
        assert_eq!(simdr_error_bound(4), 0.125);
        assert_eq!(heatmap_error_bound(4), 2.0);
        assert_eq!(heatmap_error_bound(1), 0.5);
        assert_eq!(heatmap_error_bound(8), 4.0);
        for k in 1..10 {
            assert!(simdr_error_bound(k + 1) < simdr_error_bound(k));
            assert!(heatmap_error_bound(k + 1) > heatmap_error_bound(k));
        }
    }

    #[test]
    fn costs() {
        let c = representation_cost(dims(192, 256), 2, 4).unwrap();
        assert_eq!((c.simdr_elements, c.heatmap_elements), (896, 3072));
        let c = representation_cost(dims(64, 64), 1, 4).unwrap();
        assert_eq!((c.simdr_elements, c.heatmap_elements), (128, 256));
        for n in [1u32, 5, 17, 100] {
            let c = representation_cost(dims(n, n), 1, 1).unwrap();
            assert_eq!((c.simdr_elements, c.heatmap_elements), (2 * n as u64, (n * n) as u64));
        }
        assert!(representation_cost(dims(64, 64), 1, 3).is_err());
        assert!(representation_cost(dims(64, 64), 0, 4).is_err());
    }

    #[test]
    fn cost_crossover() {
        // k (W + H) < W H / lambda^2 fails at small inputs for larger k.
        let expect = [
            (dims(192, 256), 4, true),
            (dims(128, 128), 3, true),
            (dims(128, 128), 4, false),
            (dims(64, 64), 1, true),
            (dims(64, 64), 2, false),
        ];
        for (d, k, cheaper) in expect {
            let c = representation_cost(d, k, 4).unwrap();
            assert_eq!(c.simdr_elements < c.heatmap_elements, cheaper, "{d} k={k}");
        }
    }

    #[test]
    fn lattice_point_has_zero_error() {
        let s = audit_keypoints(Scheme::SimDR { k: 1 }, dims(16, 16), &[Keypoint::new(5.0, 9.0)]).unwrap();
        assert_eq!(s.max_err, 0.0);
        assert_eq!(s.n_samples, 1);
    }

    #[test]
    fn audit_is_seed_deterministic() {
        let a = audit_roundtrip(Scheme::SimDR { k: 3 }, dims(64, 64), 10_000, 5, SamplingRange::Interior).unwrap();
        let b = audit_roundtrip(Scheme::SimDR { k: 3 }, dims(64, 64), 10_000, 5, SamplingRange::Interior).unwrap();
        let c = audit_roundtrip(Scheme::SimDR { k: 3 }, dims(64, 64), 10_000, 6, SamplingRange::Interior).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.histogram.iter().sum::<u64>(), 20_000);
    }

    #[test]
    fn audit_rejects_bad_config() {
        assert!(audit_roundtrip(
            Scheme::Heatmap { lambda: 3 },
            dims(64, 64),
            10,
            0,
            SamplingRange::Interior
        )
        .is_err());
        assert!(audit_roundtrip(Scheme::SimDR { k: 2 }, dims(64, 64), 0, 0, SamplingRange::Interior).is_err());
    }

    #[test]
    fn edge_sampling_exposes_clamp_error() {
        let s = audit_roundtrip(
            Scheme::Heatmap { lambda: 4 },
            dims(16, 16),
            20_000,
            1,
            SamplingRange::EdgeInclusive,
        )
        .unwrap();
        assert!(s.max_err > s.bound);
        assert!(s.above_bound > 0);
        assert!(!s.within_bound());
    }

    #[test]
    fn separable_route_matches_full_grid() {
        use rand::Rng;
        let d = dims(48, 32);
        let cfg = HeatmapConfig::new(4, AUDIT_HEATMAP_SIGMA, d, PeakMode::PeakOne).unwrap();
        let mut rng = sub_rng(9, "test");
        for _ in 0..500 {
            let kp = Keypoint::new(rng.gen_range(0.0..48.0), rng.gen_range(0.0..32.0));
            let full = decode_heatmap(&encode_heatmap(&kp, &cfg).unwrap(), false).unwrap();
            let sep = roundtrip(Scheme::Heatmap { lambda: 4 }, d, &kp).unwrap();
            assert_eq!((full.x, full.y), sep);
        }
    }
}

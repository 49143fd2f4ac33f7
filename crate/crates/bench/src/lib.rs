//! Shared fixtures for the criterion benchmarks under `benches/`.

use simdr_core::{ImageDims, Keypoint};

/// `n` keypoints spread over the interior of `dims` by an additive
/// golden-ratio sequence, so every run sees the same inputs.
pub fn fixture_keypoints(n: usize, dims: ImageDims) -> Vec<Keypoint> {
    const PHI_X: f64 = 0.618_033_988_749_894_9;
    const PHI_Y: f64 = 0.754_877_666_246_692_8;
    let (w, h) = (dims.width() as f64 - 1.0, dims.height() as f64 - 1.0);
    (0..n)
        .map(|i| {
            let i = i as f64 + 1.0;
            Keypoint::new((i * PHI_X).fract() * w, (i * PHI_Y).fract() * h)
        })
        .collect()
}

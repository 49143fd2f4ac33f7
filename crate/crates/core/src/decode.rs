//! Coordinate recovery from predicted 1D vectors and 2D heatmaps.

use serde::{Deserialize, Serialize};

use crate::encode::{argmax, HeatmapTarget};
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::repr::{dequantize_coord, Keypoint};

/// Offset, in heatmap cells, applied toward the larger neighbour by the
/// shifted heatmap decode.
pub const PEAK_SHIFT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedKeypoint {
    pub x: f64,
    pub y: f64,
    /// Score at the argmax. For 1D vectors, the mean of the two axis maxima.
    pub confidence: f64,
}

impl DecodedKeypoint {
    pub fn to_keypoint(self) -> Keypoint {
        Keypoint::new(self.x, self.y)
    }
}

/// `(argmax(x_vec) / k, argmax(y_vec) / k)`; ties go to the lowest index.
pub fn decode_simdr(x_vec: &[f64], y_vec: &[f64], k: u32) -> Result<DecodedKeypoint> {
    if k == 0 {
        return invalid("splitting factor k must be >= 1");
    }
    let (Some(ix), Some(iy)) = (argmax(x_vec), argmax(y_vec)) else {
        return invalid("cannot decode an empty score vector");
    };
    Ok(DecodedKeypoint {
        x: dequantize_coord(ix, k),
        y: dequantize_coord(iy, k),
        confidence: 0.5 * (x_vec[ix] + y_vec[iy]),
    })
}

pub fn decode_heatmap(target: &HeatmapTarget, shift: bool) -> Result<DecodedKeypoint> {
    decode_heatmap_grid(&target.grid, target.config.lambda(), shift)
}

/// Argmax cell (row-major, lowest index on ties) scaled by `lambda`.
///
/// With `shift`, each axis moves a quarter cell toward whichever of its two
/// neighbours scores higher. Nothing moves at a border or when the two
/// neighbours are equal.
pub fn decode_heatmap_grid(grid: &Grid, lambda: u32, shift: bool) -> Result<DecodedKeypoint> {
    if lambda == 0 {
        return invalid("downsampling ratio lambda must be >= 1");
    }
    let Some(flat) = argmax(grid.as_slice()) else {
        return invalid("cannot decode an empty heatmap");
    };
    let (row, col) = (flat / grid.cols(), flat % grid.cols());
    let mut x = col as f64;
    let mut y = row as f64;
    if shift {
        if col > 0 && col + 1 < grid.cols() {
            x += PEAK_SHIFT * neighbour_sign(grid.get(row, col - 1), grid.get(row, col + 1));
        }
        if row > 0 && row + 1 < grid.rows() {
            y += PEAK_SHIFT * neighbour_sign(grid.get(row - 1, col), grid.get(row + 1, col));
        }
    }
    let lambda = lambda as f64;
    Ok(DecodedKeypoint {
        x: x * lambda,
        y: y * lambda,
        confidence: grid.get(row, col),
    })
}

fn neighbour_sign(before: f64, after: f64) -> f64 {
    if after > before {
        1.0
    } else if before > after {
        -1.0
    } else {
        0.0
    }
}

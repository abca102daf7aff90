use serde::{Deserialize, Serialize};

use super::RadialError;

/// Geometric grid `r_j = r_min 10^{j/ppd}`, `j = 0..M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    r_min: f64,
    requested_r_max: f64,
    points_per_decade: u32,
}

/// `M = round(ppd log10(r_max/r_min)) + 1` nodes with ratio exactly
/// `10^{1/ppd}`, so every decade multiple of `r_min` is a node. The last
/// node is within half a step of `r_max`.
pub fn build_grid(r_min: f64, r_max: f64, points_per_decade: u32) -> Result<RadialGrid, RadialError> {
    if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
        return Err(RadialError::InvalidGrid(format!(
            "need 0 < r_min < r_max (got r_min = {r_min}, r_max = {r_max})"
        )));
    }
    if points_per_decade == 0 {
        return Err(RadialError::InvalidGrid("points_per_decade must be positive".into()));
    }
    let intervals = (points_per_decade as f64 * (r_max / r_min).log10()).round().max(2.0) as usize;
    let nodes: Vec<f64> = (0..=intervals)
        .map(|j| r_min * 10f64.powf(j as f64 / points_per_decade as f64))
        .collect();
    Ok(RadialGrid {
        nodes,
        r_min,
        requested_r_max: r_max,
        points_per_decade,
    })
}

impl RadialGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// The last node.
    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// The `r_max` passed to [`build_grid`].
    pub fn requested_r_max(&self) -> f64 {
        self.requested_r_max
    }

    pub fn points_per_decade(&self) -> u32 {
        self.points_per_decade
    }

    /// Spacing in `ln r`.
    pub fn log_step(&self) -> f64 {
        std::f64::consts::LN_10 / self.points_per_decade as f64
    }

    /// Ratio `r_{j+1}/r_j`.
    pub fn ratio(&self) -> f64 {
        self.log_step().exp()
    }

    /// Indices of nodes in `[a, b]`.
    pub fn window(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = self.nodes.partition_point(|&r| r < a);
        let hi = self.nodes.partition_point(|&r| r <= b);
        lo..hi.max(lo)
    }

    /// Index of the node closest to `r` in log distance.
    pub fn nearest(&self, r: f64) -> usize {
        let t = ((r / self.r_min).ln() / self.log_step()).round();
        t.clamp(0.0, (self.len() - 1) as f64) as usize
    }
}

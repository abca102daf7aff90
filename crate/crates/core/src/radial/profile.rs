use serde::{Deserialize, Serialize};

use super::{RadialError, RadialGrid};

/// Shape assumed for a profile beyond the last node, normalized to match
/// the last nodal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// `r^{-power} e^{-rate r}`
    ExpDecay { rate: f64, power: f64 },
    /// `r^{-power}`
    Power { power: f64 },
    Zero,
}

impl TailModel {
    /// `shape(s) / shape(r_end)` for `s >= r_end`.
    pub fn relative(&self, s: f64, r_end: f64) -> f64 {
        match *self {
            TailModel::ExpDecay { rate, power } => (s / r_end).powf(-power) * (-rate * (s - r_end)).exp(),
            TailModel::Power { power } => (s / r_end).powf(-power),
            TailModel::Zero => 0.0,
        }
    }

    pub fn powf(&self, e: f64) -> TailModel {
        match *self {
            TailModel::ExpDecay { rate, power } => TailModel::ExpDecay {
                rate: rate * e,
                power: power * e,
            },
            TailModel::Power { power } => TailModel::Power { power: power * e },
            TailModel::Zero => TailModel::Zero,
        }
    }

    pub fn product(&self, other: &TailModel) -> TailModel {
        use TailModel::*;
        match (*self, *other) {
            (Zero, _) | (_, Zero) => Zero,
            (ExpDecay { rate: a, power: m }, ExpDecay { rate: b, power: n }) => ExpDecay {
                rate: a + b,
                power: m + n,
            },
            (ExpDecay { rate, power: m }, Power { power: n }) | (Power { power: n }, ExpDecay { rate, power: m }) => {
                ExpDecay { rate, power: m + n }
            }
            (Power { power: m }, Power { power: n }) => Power { power: m + n },
        }
    }

    /// The slower of the two decays.
    pub fn slower(&self, other: &TailModel) -> TailModel {
        use TailModel::*;
        match (*self, *other) {
            (Zero, t) | (t, Zero) => t,
            (Power { power: m }, Power { power: n }) => Power { power: m.min(n) },
            (p @ Power { .. }, ExpDecay { .. }) | (ExpDecay { .. }, p @ Power { .. }) => p,
            (a @ ExpDecay { rate: ra, power: ma }, b @ ExpDecay { rate: rb, power: mb }) => {
                if ra < rb || (ra == rb && ma <= mb) {
                    a
                } else {
                    b
                }
            }
        }
    }
}

/// Nodal values of a radial function together with the annotations the
/// quadrature needs outside the grid: a power law `values[0] (r/r_1)^{-sigma}`
/// below the first node and a [`TailModel`] beyond the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
    origin_exponent: Option<f64>,
    tail: TailModel,
    /// Set when an operator saw an origin exponent inconsistent with the
    /// first two nodes.
    annotation_warning: bool,
}

fn check_values(values: &[f64]) -> Result<(), RadialError> {
    match values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        Some(i) => Err(RadialError::InvalidValue { index: i, value: values[i] }),
        None => Ok(()),
    }
}

impl RadialProfile {
    pub fn new(
        grid: RadialGrid,
        values: Vec<f64>,
        origin_exponent: Option<f64>,
        tail: TailModel,
    ) -> Result<Self, RadialError> {
        if values.len() != grid.len() {
            return Err(RadialError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_values(&values)?;
        if let Some(s) = origin_exponent {
            if !(s.is_finite() && s >= 0.0) {
                return Err(RadialError::InvalidAnnotation(format!("origin exponent {s}")));
            }
        }
        Ok(Self {
            grid,
            values,
            origin_exponent,
            tail,
            annotation_warning: false,
        })
    }

    /// Samples `f` at the nodes.
    pub fn from_fn<F: Fn(f64) -> f64>(
        grid: &RadialGrid,
        f: F,
        origin_exponent: Option<f64>,
        tail: TailModel,
    ) -> Result<Self, RadialError> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid.clone(), values, origin_exponent, tail)
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            origin_exponent: Some(0.0),
            tail: TailModel::Zero,
            annotation_warning: false,
        }
    }

    /// Indicator of `[0, radius]`; a node falling on `radius` (to 1e-12
    /// relative) gets the midpoint value 1/2.
    pub fn indicator(grid: &RadialGrid, radius: f64) -> Self {
        let values = grid
            .nodes()
            .iter()
            .map(|&r| {
                if ((r - radius) / radius).abs() < 1e-12 {
                    0.5
                } else if r < radius {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
            origin_exponent: Some(0.0),
            tail: TailModel::Zero,
            annotation_warning: false,
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn origin_exponent(&self) -> Option<f64> {
        self.origin_exponent
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn annotation_warning(&self) -> bool {
        self.annotation_warning
    }

    pub fn with_origin_exponent(mut self, sigma: Option<f64>) -> Self {
        self.origin_exponent = sigma;
        self
    }

    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = tail;
        self
    }

    pub(crate) fn with_warning(mut self, warning: bool) -> Self {
        self.annotation_warning = warning;
        self
    }

    /// The annotated origin exponent, or `-slope` of a log-log regression
    /// through the first three nodes (clamped at 0) when unset.
    pub fn effective_origin_exponent(&self) -> f64 {
        if let Some(s) = self.origin_exponent {
            return s;
        }
        let pts: Vec<(f64, f64)> = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .take(3)
            .map(|(&r, &v)| (r.ln(), v))
            .collect();
        if pts.len() < 2 || pts.iter().any(|p| p.1 <= 0.0) {
            return 0.0;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (-sxy / sxx).max(0.0)
    }

    /// `|sigma - slope|` where `slope` is the log-log slope between the
    /// first two nodes; `None` when either value is zero.
    pub fn origin_slope_mismatch(&self) -> Option<f64> {
        let sigma = self.origin_exponent?;
        let (v0, v1) = (self.values[0], *self.values.get(1)?);
        if v0 <= 0.0 || v1 <= 0.0 {
            return None;
        }
        let slope = -(v1 / v0).ln() / self.grid.log_step();
        Some((sigma - slope).abs())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &b| a.max(b))
    }

    fn check_grid(&self, other: &RadialProfile) -> Result<(), RadialError> {
        if self.grid != other.grid {
            return Err(RadialError::GridMismatch);
        }
        Ok(())
    }

    pub fn pointwise_power(&self, e: f64) -> Result<RadialProfile, RadialError> {
        if !(e >= 0.0) {
            return Err(RadialError::InvalidAnnotation(format!("negative power {e}")));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.powf(e)).collect(),
            origin_exponent: self.origin_exponent.map(|s| s * e),
            tail: self.tail.powf(e),
            annotation_warning: self.annotation_warning,
        })
    }

    pub fn pointwise_product(&self, other: &RadialProfile) -> Result<RadialProfile, RadialError> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
            origin_exponent: match (self.origin_exponent, other.origin_exponent) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            },
            tail: self.tail.product(&other.tail),
            annotation_warning: self.annotation_warning || other.annotation_warning,
        })
    }

    pub fn pointwise_add(&self, other: &RadialProfile) -> Result<RadialProfile, RadialError> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            origin_exponent: match (self.origin_exponent, other.origin_exponent) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            },
            tail: self.tail.slower(&other.tail),
            annotation_warning: self.annotation_warning || other.annotation_warning,
        })
    }

    pub fn pointwise_scale(&self, c: f64) -> Result<RadialProfile, RadialError> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(RadialError::InvalidAnnotation(format!("scale factor {c}")));
        }
        if c == 0.0 {
            return Ok(Self::zeros(&self.grid));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::build_grid;

    fn grid() -> RadialGrid {
        build_grid(1e-3, 10.0, 10).unwrap()
    }

    #[test]
    fn power_scales_annotations() {
        let g = grid();
        let f = RadialProfile::from_fn(&g, |r| (-r).exp() / r, Some(1.0), TailModel::ExpDecay { rate: 1.0, power: 1.0 })
            .unwrap();
        let p = f.pointwise_power(2.0).unwrap();
        assert_eq!(p.origin_exponent(), Some(2.0));
        assert_eq!(p.tail(), TailModel::ExpDecay { rate: 2.0, power: 2.0 });
        assert!((p.values()[3] - f.values()[3].powi(2)).abs() < 1e-12 * p.values()[3]);
    }

    #[test]
    fn product_and_sum_annotations() {
        let g = grid();
        let a = RadialProfile::from_fn(&g, |r| r.powi(-2), Some(2.0), TailModel::Power { power: 1.0 }).unwrap();
        let b = RadialProfile::from_fn(&g, |r| (-r).exp() / r, Some(1.0), TailModel::ExpDecay { rate: 1.0, power: 1.0 })
            .unwrap();
        let prod = a.pointwise_product(&b).unwrap();
        assert_eq!(prod.origin_exponent(), Some(3.0));
        assert_eq!(prod.tail(), TailModel::ExpDecay { rate: 1.0, power: 2.0 });
        let sum = a.pointwise_add(&b).unwrap();
        assert_eq!(sum.origin_exponent(), Some(2.0));
        assert_eq!(sum.tail(), TailModel::Power { power: 1.0 });
    }

    #[test]
    fn scale_by_zero_gives_zero_profile() {
        let g = grid();
        let a = RadialProfile::from_fn(&g, |r| 1.0 / r, Some(1.0), TailModel::Power { power: 1.0 }).unwrap();
        let z = a.pointwise_scale(0.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert_eq!(z.tail(), TailModel::Zero);
        assert!(a.pointwise_scale(-1.0).is_err());
    }

    #[test]
    fn rejects_negative_values_and_bad_lengths() {
        let g = grid();
        assert!(RadialProfile::new(g.clone(), vec![1.0; 3], None, TailModel::Zero).is_err());
        let mut v = vec![1.0; g.len()];
        v[4] = -1e-3;
        assert!(matches!(
            RadialProfile::new(g, v, None, TailModel::Zero),
            Err(RadialError::InvalidValue { index: 4, .. })
        ));
    }

    #[test]
    fn estimates_origin_exponent_from_nodes() {
        let g = grid();
        let f = RadialProfile::from_fn(&g, |r| r.powf(-1.7), None, TailModel::Zero).unwrap();
        assert!((f.effective_origin_exponent() - 1.7).abs() < 1e-10);
        let f = f.with_origin_exponent(Some(0.5));
        assert!((f.origin_slope_mismatch().unwrap() - 1.2).abs() < 1e-10);
    }

    #[test]
    fn indicator_uses_midpoint_value_on_the_jump() {
        let g = grid();
        let chi = RadialProfile::indicator(&g, 1.0);
        let j = g.nearest(1.0);
        assert_eq!(chi.values()[j], 0.5);
        assert_eq!(chi.values()[j - 1], 1.0);
        assert_eq!(chi.values()[j + 1], 0.0);
    }
}

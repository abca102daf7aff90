//! Product-integration matrices for the radial Riesz and Green operators.
//!
//! Between nodes a profile is interpolated as `f(s) ≈ s^{-sigma} g(ln s)`,
//! where `sigma` is the profile's origin exponent and `g` interpolates the
//! nodal values `f_j r_j^sigma` in `t = ln s`: cubic Lagrange on interior
//! cells, quadratic on the last one. Pure power laws `s^{-sigma}` are
//! reproduced exactly. Below the first node the profile is continued by the
//! same power law, beyond the last by its tail model.
//!
//! Cubic weights are kernel moments against Lagrange basis polynomials and
//! can in principle come out negative; any row with a negative weight is
//! replaced by its piecewise-linear (hat function) counterpart, whose
//! weights are nonnegative by construction. Every assembled weight is
//! therefore nonnegative and application preserves nodewise order.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RadialError, RadialGrid, RadialProfile, TailModel};
use crate::exponents::transfer_exponent_f64;
use crate::kernels::{riesz_log, GreenKernel, KernelError};
use crate::quadrature::{gauss16, integrate_adaptive, integrate_graded, SingularEnd};
use crate::special::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    /// `I_alpha[f](x) = ∫ f(y) |x - y|^{alpha - N} dy`
    Riesz { alpha: f64 },
    /// `G[f] = Gamma_0 * f`, the inverse of `-Δ + 1`
    Green,
}

impl OperatorKind {
    /// Smoothing order: `alpha` for Riesz, 2 for Green.
    pub fn order(&self) -> f64 {
        match *self {
            OperatorKind::Riesz { alpha } => alpha,
            OperatorKind::Green => 2.0,
        }
    }
}

type Cache<K> = Mutex<HashMap<K, Arc<Vec<f64>>>>;

/// Dense operator on a [`RadialGrid`]. Interior weights depend on the
/// origin exponent of the input and origin/tail weights on its
/// annotations; all three are assembled on first use and cached.
#[derive(Debug)]
pub struct OperatorMatrix {
    kind: OperatorKind,
    n: u32,
    grid: RadialGrid,
    green: Option<GreenTable>,
    weights: Cache<u64>,
    origin: Cache<u64>,
    tails: Cache<TailKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TailKey(u8, u64, u64);

impl From<TailModel> for TailKey {
    fn from(t: TailModel) -> Self {
        match t {
            TailModel::ExpDecay { rate, power } => TailKey(0, rate.to_bits(), power.to_bits()),
            TailModel::Power { power } => TailKey(1, 0, power.to_bits()),
            TailModel::Zero => TailKey(2, 0, 0),
        }
    }
}

const TOL: f64 = 1e-13;

/// Quadrature points of every grid cell with the Green kernel factors
/// precomputed.
#[derive(Debug)]
struct GreenTable {
    kernel: GreenKernel,
    /// Per cell, per point: `(s, weight in ln s, x = (ln s - t_c)/h, inner(s), outer(s))`.
    points: Vec<Vec<[f64; 5]>>,
    inner_nodes: Vec<f64>,
    outer_nodes: Vec<f64>,
}

impl GreenTable {
    fn new(n: u32, grid: &RadialGrid) -> Result<Self, KernelError> {
        let kernel = GreenKernel::new(n);
        let nodes = grid.nodes();
        let rule = gauss16();
        let mut points = Vec::with_capacity(nodes.len() - 1);
        for c in 0..nodes.len() - 1 {
            let (t0, t1) = (nodes[c].ln(), nodes[c + 1].ln());
            let mut cell = Vec::with_capacity(rule.nodes.len());
            for (t, w) in rule.points(t0, t1) {
                let s = t.exp();
                let rise = (t - t0) / (t1 - t0);
                cell.push([s, w, rise, kernel.inner_factor(s)?, kernel.outer_factor(s)?]);
            }
            points.push(cell);
        }
        let inner_nodes = nodes.iter().map(|&r| kernel.inner_factor(r)).collect::<Result<_, _>>()?;
        let outer_nodes = nodes.iter().map(|&r| kernel.outer_factor(r)).collect::<Result<_, _>>()?;
        Ok(Self {
            kernel,
            points,
            inner_nodes,
            outer_nodes,
        })
    }
}

/// Cubic Lagrange basis on nodes x = -1, 0, 1, 2 as coefficients of
/// `1, x, x^2, x^3`.
const CUBIC: [[f64; 4]; 4] = [
    [0.0, -1.0 / 3.0, 0.5, -1.0 / 6.0],
    [1.0, -0.5, -1.0, 0.5],
    [0.0, 1.0, 0.5, -0.5],
    [0.0, -1.0 / 6.0, 0.0, 1.0 / 6.0],
];
/// Quadratic basis on nodes x = -1, 0, 1.
const QUADRATIC: [[f64; 4]; 3] = [[0.0, -0.5, 0.5, 0.0], [1.0, 0.0, -1.0, 0.0], [0.0, 0.5, 0.5, 0.0]];
/// Hat functions on x = 0, 1.
const LINEAR: [[f64; 4]; 2] = [[1.0, -1.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];

fn dot(coef: &[f64; 4], mom: &[f64; 4]) -> f64 {
    coef.iter().zip(mom).map(|(a, b)| a * b).sum()
}

/// Fills one row of interior weights from per-cell moments
/// `∫_cell K̃ x^k`, `x = (ln s - t_c)/h`, and per-node factors.
///
/// The ghost node left of the first is given the first node's value
/// (the power-law continuation), so the first cell is cubic as well.
fn fill_row<M, F>(row: &mut [f64], moments: M, factor: F)
where
    M: Fn(usize) -> [f64; 4],
    F: Fn(usize) -> f64,
{
    let m = row.len();
    let all: Vec<[f64; 4]> = (0..m - 1).map(&moments).collect();
    for (c, mom) in all.iter().enumerate() {
        if c + 2 < m {
            for (k, coef) in CUBIC.iter().enumerate() {
                let j = (c + k).max(1) - 1;
                row[j] += dot(coef, mom);
            }
        } else {
            for (k, coef) in QUADRATIC.iter().enumerate() {
                row[c + k - 1] += dot(coef, mom);
            }
        }
    }
    for (j, w) in row.iter_mut().enumerate() {
        *w *= factor(j);
    }
    if row.iter().all(|&w| w >= 0.0) {
        return;
    }
    row.iter_mut().for_each(|w| *w = 0.0);
    for (c, mom) in all.iter().enumerate() {
        for (k, coef) in LINEAR.iter().enumerate() {
            row[c + k] += dot(coef, mom);
        }
    }
    for (j, w) in row.iter_mut().enumerate() {
        *w = (*w * factor(j)).max(0.0);
    }
}

/// Builds the operator and its `sigma = 0` interior weights.
pub fn assemble(kind: OperatorKind, n: u32, grid: &RadialGrid) -> Result<OperatorMatrix, RadialError> {
    if n < 3 {
        return Err(RadialError::InvalidGrid(format!("dimension N = {n} must be at least 3")));
    }
    if let OperatorKind::Riesz { alpha } = kind {
        if !(alpha > 0.0 && alpha < n as f64) {
            return Err(KernelError::AlphaOutOfRange { alpha, n }.into());
        }
    }
    if grid.len() < 3 {
        return Err(RadialError::InvalidGrid("operators need at least 3 nodes".into()));
    }
    let green = match kind {
        OperatorKind::Green => Some(GreenTable::new(n, grid)?),
        OperatorKind::Riesz { .. } => None,
    };
    let op = OperatorMatrix {
        kind,
        n,
        grid: grid.clone(),
        green,
        weights: Mutex::new(HashMap::new()),
        origin: Mutex::new(HashMap::new()),
        tails: Mutex::new(HashMap::new()),
    };
    op.weights(0.0)?;
    Ok(op)
}

fn cached<K, F>(cache: &Cache<K>, key: K, build: F) -> Result<Arc<Vec<f64>>, RadialError>
where
    K: std::hash::Hash + Eq + Copy,
    F: FnOnce() -> Result<Vec<f64>, RadialError>,
{
    if let Some(w) = cache.lock().unwrap().get(&key) {
        return Ok(w.clone());
    }
    let w = Arc::new(build()?);
    cache.lock().unwrap().entry(key).or_insert_with(|| w.clone());
    Ok(w)
}

impl OperatorMatrix {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dimension(&self) -> u32 {
        self.n
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    fn check_sigma(&self, sigma: f64) -> Result<(), RadialError> {
        if !(sigma >= 0.0) || sigma >= self.n as f64 {
            return Err(RadialError::NonIntegrableOrigin { sigma, n: self.n });
        }
        Ok(())
    }

    /// Row-major `M x M` interior weights for inputs with origin exponent
    /// `sigma`.
    pub fn weights(&self, sigma: f64) -> Result<Arc<Vec<f64>>, RadialError> {
        self.check_sigma(sigma)?;
        cached(&self.weights, sigma.to_bits(), || match self.kind {
            OperatorKind::Riesz { alpha } => self.riesz_weights(alpha, sigma),
            OperatorKind::Green => Ok(self.green_weights(sigma)),
        })
    }

    /// Weight of the first nodal value for the cell `(0, r_1)`.
    pub fn origin_weights(&self, sigma: f64) -> Result<Arc<Vec<f64>>, RadialError> {
        self.check_sigma(sigma)?;
        cached(&self.origin, sigma.to_bits(), || self.build_origin(sigma))
    }

    /// Weight of the last nodal value for `(r_M, ∞)`.
    pub fn tail_weights(&self, tail: TailModel) -> Result<Arc<Vec<f64>>, RadialError> {
        if let (OperatorKind::Riesz { alpha }, TailModel::Power { power }) = (self.kind, tail) {
            if power <= alpha {
                return Err(RadialError::NonIntegrableTail { power, alpha });
            }
        }
        cached(&self.tails, TailKey::from(tail), || self.build_tail(tail))
    }

    fn riesz_weights(&self, alpha: f64, sigma: f64) -> Result<Vec<f64>, RadialError> {
        let m = self.grid.len();
        let n = self.n;
        let h = self.grid.log_step();
        let nf = n as f64;
        let g = (3.0 / alpha).ceil().max(3.0);
        // Relative cell e spans [e h, (e+1) h] in u = ln(s / r_i); moments
        // of κ(u) e^{(N - sigma) u} against x^k, x = u/h - e.
        let cells: Vec<i64> = (-(m as i64 - 1)..(m as i64 - 1)).collect();
        let moments = cells
            .par_iter()
            .map(|&e| -> Result<[f64; 4], KernelError> {
                let (a, b) = (e as f64 * h, (e + 1) as f64 * h);
                let mut err = None;
                let mut out = [0.0; 4];
                for (k, slot) in out.iter_mut().enumerate() {
                    let mut f = |u: f64| {
                        if u == 0.0 {
                            return 0.0;
                        }
                        match riesz_log(n, alpha, u) {
                            Ok(v) => v * ((nf - sigma) * u).exp() * ((u - a) / h).powi(k as i32),
                            Err(e) => {
                                err = Some(e);
                                0.0
                            }
                        }
                    };
                    *slot = match e {
                        0 => integrate_graded(&mut f, a, b, SingularEnd::Left, g, TOL),
                        -1 => integrate_graded(&mut f, a, b, SingularEnd::Right, g, TOL),
                        _ => gauss16().integrate(&mut f, a, b),
                    };
                }
                match err {
                    Some(e) => Err(e),
                    None => Ok(out),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let offset = m as i64 - 1;
        let nodes = self.grid.nodes();
        let mut w = vec![0.0; m * m];
        w.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let scale = nodes[i].powf(alpha);
            fill_row(
                row,
                |c| moments[(c as i64 - i as i64 + offset) as usize],
                |j| scale * (sigma * (j as f64 - i as f64) * h).exp(),
            );
        });
        Ok(w)
    }

    fn green_weights(&self, sigma: f64) -> Vec<f64> {
        let table = self.green.as_ref().expect("green table");
        let m = self.grid.len();
        let nf = self.n as f64;
        let nodes = self.grid.nodes();
        let mut w = vec![0.0; m * m];
        w.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let r = nodes[i];
            let (a_r, b_r) = (table.inner_nodes[i], table.outer_nodes[i]);
            let moments = |c: usize| {
                let mut out = [0.0; 4];
                for &[s, wt, x, a_s, b_s] in &table.points[c] {
                    let k = if c >= i {
                        a_r * b_s * (r - s).exp()
                    } else {
                        a_s * b_r * (s - r).exp()
                    };
                    let base = wt * k * s.powf(nf - sigma);
                    out[0] += base;
                    out[1] += base * x;
                    out[2] += base * x * x;
                    out[3] += base * x * x * x;
                }
                out
            };
            fill_row(row, moments, |j| nodes[j].powf(sigma));
        });
        w
    }

    fn build_origin(&self, sigma: f64) -> Result<Vec<f64>, RadialError> {
        let nodes = self.grid.nodes();
        let r1 = nodes[0];
        let nf = self.n as f64;
        let n = self.n;
        let h = self.grid.log_step();
        let lead = r1.powf(nf) / (nf - sigma);
        let kind = self.kind;
        (0..nodes.len())
            .into_par_iter()
            .map(|i| -> Result<f64, RadialError> {
                let mut err = None;
                // s = r_1 v^{1/(N - sigma)}, v = 1 - w
                let val = match kind {
                    OperatorKind::Riesz { alpha } => {
                        let g = (3.0 / alpha).ceil().max(3.0);
                        let f = |w: f64| {
                            let u = -(i as f64) * h + (-w).ln_1p() / (nf - sigma);
                            if u == 0.0 {
                                return 0.0;
                            }
                            riesz_log(n, alpha, u).unwrap_or_else(|e| {
                                err = Some(e);
                                0.0
                            })
                        };
                        let integral = if i == 0 {
                            integrate_graded(f, 0.0, 1.0, SingularEnd::Left, g, TOL)
                        } else {
                            integrate_adaptive(f, 0.0, 1.0, TOL)
                        };
                        nodes[i].powf(alpha - nf) * integral
                    }
                    OperatorKind::Green => {
                        let table = self.green.as_ref().expect("green table");
                        let (r, b_r) = (nodes[i], table.outer_nodes[i]);
                        let kernel = table.kernel;
                        // v = w^{N - sigma} makes s = r_1 w linear in w
                        integrate_graded(
                            |v: f64| {
                                if v <= 0.0 {
                                    return 0.0;
                                }
                                let s = r1 * v.powf(1.0 / (nf - sigma));
                                if s <= 0.0 {
                                    // underflow: use the s -> 0 limit of the inner factor
                                    return kernel.inner_factor(f64::MIN_POSITIVE).unwrap_or(0.0) * b_r * (-r).exp();
                                }
                                match kernel.inner_factor(s) {
                                    Ok(a) => a * b_r * (s.min(r) - r).exp(),
                                    Err(e) => {
                                        err = Some(e);
                                        0.0
                                    }
                                }
                            },
                            0.0,
                            1.0,
                            SingularEnd::Left,
                            (nf - sigma).max(1.0),
                            TOL,
                        )
                    }
                };
                match err {
                    Some(e) => Err(e.into()),
                    None => Ok(lead * val),
                }
            })
            .collect()
    }

    fn build_tail(&self, tail: TailModel) -> Result<Vec<f64>, RadialError> {
        let nodes = self.grid.nodes();
        let m = nodes.len();
        if tail == TailModel::Zero {
            return Ok(vec![0.0; m]);
        }
        let r_end = nodes[m - 1];
        let h = self.grid.log_step();
        let nf = self.n as f64;
        let n = self.n;
        let kind = self.kind;
        (0..m)
            .into_par_iter()
            .map(|i| -> Result<f64, RadialError> {
                let r = nodes[i];
                let mut err = None;
                let mut kernel = |s: f64| -> f64 {
                    let k = match kind {
                        OperatorKind::Riesz { alpha } => {
                            let u = (s / r).ln();
                            if u == 0.0 {
                                return 0.0;
                            }
                            riesz_log(n, alpha, u).map(|v| r.powf(alpha - nf) * v)
                        }
                        OperatorKind::Green => {
                            let t = self.green.as_ref().expect("green table");
                            t.kernel.outer_factor(s).map(|b| t.inner_nodes[i] * b * (r - s).exp())
                        }
                    };
                    match k {
                        Ok(k) => k * tail.relative(s, r_end) * s.powf(nf - 1.0),
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    }
                };
                // first panel [r_M, r_M e^h] may hold the diagonal singularity
                let first_end = r_end * h.exp();
                let mut total = match (kind, i + 1 == m) {
                    (OperatorKind::Riesz { alpha }, true) => {
                        let g = (3.0 / alpha).ceil().max(3.0);
                        integrate_graded(&mut kernel, r_end, first_end, SingularEnd::Left, g, TOL)
                    }
                    _ => integrate_adaptive(&mut kernel, r_end, first_end, TOL),
                };
                let mut lo = first_end;
                let mut converged = false;
                for _ in 0..60 {
                    let hi = 2.0 * lo;
                    let part = integrate_adaptive(&mut kernel, lo, hi, TOL);
                    total += part;
                    lo = hi;
                    if part <= 1e-17 * total {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    if let (OperatorKind::Riesz { alpha }, TailModel::Power { power }) = (kind, tail) {
                        // far field: kernel ~ |S^{N-1}| s^{alpha - N}
                        total += sphere_area(n) * r_end.powf(power) * lo.powf(alpha - power) / (power - alpha);
                    }
                }
                match err {
                    Some(e) => Err(e.into()),
                    None => Ok(total),
                }
            })
            .collect()
    }

    /// Applies the operator to nodal values with the given annotations.
    pub fn apply_values(&self, values: &[f64], sigma: f64, tail: TailModel) -> Result<Vec<f64>, RadialError> {
        let m = self.grid.len();
        if values.len() != m {
            return Err(RadialError::LengthMismatch {
                expected: m,
                got: values.len(),
            });
        }
        let w = self.weights(sigma)?;
        let origin = self.origin_weights(sigma)?;
        let tails = self.tail_weights(tail)?;
        let (first, last) = (values[0], values[m - 1]);
        Ok(w
            .chunks(m)
            .enumerate()
            .map(|(i, row)| {
                let inner: f64 = row.iter().zip(values).map(|(a, b)| a * b).sum();
                inner + origin[i] * first + tails[i] * last
            })
            .collect())
    }

    /// Applies the operator and propagates annotations: the origin exponent
    /// through the rate transfer of the operator's order, the tail through
    /// the kernel's decay.
    pub fn apply(&self, f: &RadialProfile) -> Result<RadialProfile, RadialError> {
        if f.grid() != &self.grid {
            return Err(RadialError::GridMismatch);
        }
        let sigma = f.effective_origin_exponent();
        let out = self.apply_values(f.values(), sigma, f.tail())?;
        let warning = f.annotation_warning() || f.origin_slope_mismatch().is_some_and(|d| d > 0.5);
        let nf = self.n as f64;
        let tail = match (self.kind, f.tail()) {
            (_, TailModel::Zero) if f.values().iter().all(|&v| v == 0.0) => TailModel::Zero,
            (OperatorKind::Green, TailModel::ExpDecay { rate, power }) if rate < 1.0 => {
                TailModel::ExpDecay { rate, power }
            }
            (OperatorKind::Green, _) => TailModel::ExpDecay {
                rate: 1.0,
                power: (nf - 1.0) / 2.0,
            },
            (OperatorKind::Riesz { alpha }, TailModel::Power { power }) if power < nf => {
                TailModel::Power { power: power - alpha }
            }
            (OperatorKind::Riesz { alpha }, _) => TailModel::Power { power: nf - alpha },
        };
        let sigma_out = transfer_exponent_f64(sigma, self.kind.order());
        Ok(RadialProfile::new(self.grid.clone(), out, Some(sigma_out), tail)?.with_warning(warning))
    }
}

//! Monotone iteration for the minimal singular solution
//!
//! ```text
//! v_0 = k Γ_0,   v_{n+1} = G[I_alpha[v_n^p] v_n^q] + k Γ_0,
//! ```
//!
//! the barrier `w_t = t k^{p+q} G[I_alpha[Φ_0^p] Φ_0^q] + k Φ_0` that caps
//! it, and a bisection for the largest `k` with a convergent iteration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{classify, k_threshold, tangency_admissible, ExponentError, ProblemExponents};
use crate::kernels::{gamma0, phi0, KernelError};
use crate::radial::{assemble, OperatorKind, OperatorMatrix, RadialError, RadialGrid, RadialProfile, TailModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("exponents are supercritical ({0})")]
    Supercritical(String),
    #[error("invalid problem: {0}")]
    InvalidInstance(String),
    #[error("barrier ratio grows toward the {0} end of the grid")]
    RatioGrowsAtEnd(GridEnd),
    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridEnd {
    Origin,
    Tail,
}

impl std::fmt::Display for GridEnd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GridEnd::Origin => "origin",
            GridEnd::Tail => "tail",
        })
    }
}

/// The two operators of the iteration on one grid.
#[derive(Debug)]
pub struct Operators {
    pub riesz: OperatorMatrix,
    pub green: OperatorMatrix,
}

impl Operators {
    pub fn assemble(e: &ProblemExponents, grid: &RadialGrid) -> Result<Self, SolverError> {
        let n = e.n();
        Ok(Self {
            riesz: assemble(OperatorKind::Riesz { alpha: e.alpha_f64() }, n, grid)?,
            green: assemble(OperatorKind::Green, n, grid)?,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        self.green.grid()
    }
}

pub const DEFAULT_MAX_ITER: usize = 2000;
pub const DEFAULT_CONV_TOL: f64 = 1e-8;
/// Consecutive sup-norm increases required before a blow-up verdict.
pub const GROWTH_RUN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub exponents: ProblemExponents,
    pub k: f64,
    pub max_iter: usize,
    pub conv_tol: f64,
    /// `None` selects `1e12 k Γ_0(r_1)`.
    pub blowup_cap: Option<f64>,
}

impl ProblemInstance {
    pub fn new(exponents: ProblemExponents, k: f64) -> Self {
        Self {
            exponents,
            k,
            max_iter: DEFAULT_MAX_ITER,
            conv_tol: DEFAULT_CONV_TOL,
            blowup_cap: None,
        }
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(SolverError::InvalidInstance(format!("k must be positive (got {})", self.k)));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidInstance("max_iter must be positive".into()));
        }
        if !(self.conv_tol > 0.0) {
            return Err(SolverError::InvalidInstance(format!(
                "conv_tol must be positive (got {})",
                self.conv_tol
            )));
        }
        if let Some(cap) = self.blowup_cap {
            if !(cap > 0.0) {
                return Err(SolverError::InvalidInstance(format!("blowup_cap must be positive (got {cap})")));
            }
        }
        let report = classify(&self.exponents);
        if !report.is_subcritical() {
            return Err(SolverError::Supercritical(report.trigger_summary()));
        }
        Ok(())
    }
}

/// Solver-grade grids reach `r_min <= 1e-3` and `r_max >= 20`.
pub fn check_grid(grid: &RadialGrid) -> Result<(), SolverError> {
    if grid.r_min() > 1e-3 || grid.r_max() < 20.0 {
        return Err(SolverError::InvalidInstance(format!(
            "grid must cover [1e-3, 20] (got [{}, {}])",
            grid.r_min(),
            grid.r_max()
        )));
    }
    Ok(())
}

/// `c Γ_0` with origin exponent `N - 2` and tail `e^{-r} r^{-(N-1)/2}`.
pub fn gamma0_profile(n: u32, grid: &RadialGrid, c: f64) -> Result<RadialProfile, SolverError> {
    let values = grid
        .nodes()
        .iter()
        .map(|&r| gamma0(n, r).map(|g| c * g))
        .collect::<Result<Vec<_>, _>>()?;
    let nf = n as f64;
    Ok(RadialProfile::new(
        grid.clone(),
        values,
        Some(nf - 2.0),
        TailModel::ExpDecay {
            rate: 1.0,
            power: (nf - 1.0) / 2.0,
        },
    )?)
}

/// `c Φ_0` with origin exponent `N - 2` and tail `e^{-r/2} r^{-(N-1)/2}`.
pub fn phi0_profile(n: u32, grid: &RadialGrid, c: f64) -> Result<RadialProfile, SolverError> {
    let values = grid
        .nodes()
        .iter()
        .map(|&r| phi0(n, r).map(|g| c * g))
        .collect::<Result<Vec<_>, _>>()?;
    let nf = n as f64;
    Ok(RadialProfile::new(
        grid.clone(),
        values,
        Some(nf - 2.0),
        TailModel::ExpDecay {
            rate: 0.5,
            power: (nf - 1.0) / 2.0,
        },
    )?)
}

/// `G[I_alpha[v^p] v^q]`.
pub fn nonlinearity(v: &RadialProfile, e: &ProblemExponents, ops: &Operators) -> Result<RadialProfile, SolverError> {
    let vp = v.pointwise_power(e.p_f64())?;
    let riesz = ops.riesz.apply(&vp)?;
    let source = riesz.pointwise_product(&v.pointwise_power(e.q_f64())?)?;
    Ok(ops.green.apply(&source)?)
}

/// One step `G[I_alpha[v^p] v^q] + k Γ_0`. The result keeps the origin
/// exponent `N - 2` of `k Γ_0`, whose singularity dominates.
pub fn iterate_once(v: &RadialProfile, inst: &ProblemInstance, ops: &Operators) -> Result<RadialProfile, SolverError> {
    let n = inst.exponents.n();
    let base = gamma0_profile(n, ops.grid(), inst.k)?;
    next_iterate(v, &base, inst, ops)
}

fn next_iterate(
    v: &RadialProfile,
    base: &RadialProfile,
    inst: &ProblemInstance,
    ops: &Operators,
) -> Result<RadialProfile, SolverError> {
    let out = nonlinearity(v, &inst.exponents, ops)?.pointwise_add(base)?;
    Ok(out.with_origin_exponent(base.origin_exponent()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub sup_norm: f64,
    /// `max_i |v_{n+1,i} - v_{n,i}| / v_{n+1,i}`
    pub rel_delta: f64,
    /// `max_i (v_{n,i} - v_{n+1,i})_+ / |v_n|_sup`
    pub monotonicity_violation: f64,
    /// `min_i (w_i - v_{n+1,i}) / |w|_sup` when a barrier is supplied.
    pub barrier_margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn max_monotonicity_violation(&self) -> f64 {
        self.records.iter().map(|r| r.monotonicity_violation).fold(0.0, f64::max)
    }

    pub fn min_barrier_margin(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.barrier_margin)
            .reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SolveOutcome {
    Converged {
        profile: RadialProfile,
        iterations: usize,
        trace: IterationTrace,
    },
    Diverged {
        iteration: usize,
        sup_norm: f64,
        trace: IterationTrace,
    },
    MaxIterations {
        trace: IterationTrace,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    Undetermined,
}

impl SolveOutcome {
    pub fn verdict(&self) -> Verdict {
        match self {
            SolveOutcome::Converged { .. } => Verdict::Converged,
            SolveOutcome::Diverged { .. } => Verdict::Diverged,
            SolveOutcome::MaxIterations { .. } => Verdict::Undetermined,
        }
    }

    pub fn trace(&self) -> &IterationTrace {
        match self {
            SolveOutcome::Converged { trace, .. }
            | SolveOutcome::Diverged { trace, .. }
            | SolveOutcome::MaxIterations { trace } => trace,
        }
    }

    pub fn profile(&self) -> Option<&RadialProfile> {
        match self {
            SolveOutcome::Converged { profile, .. } => Some(profile),
            _ => None,
        }
    }
}

/// Runs the iteration from `k Γ_0`. With `barrier`, every iterate's margin
/// below it is recorded.
pub fn solve_minimal(
    inst: &ProblemInstance,
    ops: &Operators,
    barrier: Option<&RadialProfile>,
) -> Result<SolveOutcome, SolverError> {
    inst.validate()?;
    let n = inst.exponents.n();
    let base = gamma0_profile(n, ops.grid(), inst.k)?;
    let cap = inst.blowup_cap.unwrap_or(1e12 * base.values()[0]);
    let mut trace = IterationTrace::default();
    let mut v = base.clone();
    let mut growth = 0;
    for it in 1..=inst.max_iter {
        let next = match next_iterate(&v, &base, inst, ops) {
            Ok(next) => next,
            // overflow to inf/NaN ends the run as a blow-up
            Err(SolverError::Radial(RadialError::InvalidValue { .. })) => {
                return Ok(SolveOutcome::Diverged {
                    iteration: it,
                    sup_norm: f64::INFINITY,
                    trace,
                });
            }
            Err(e) => return Err(e),
        };
        let (old_sup, sup) = (v.sup_norm(), next.sup_norm());
        // Nodewise relative change: the sup norm sits at the first node,
        // where k Γ_0 swamps the correction.
        let mut delta = 0.0f64;
        let mut drop = 0.0f64;
        for (a, b) in v.values().iter().zip(next.values()) {
            if *b > 0.0 {
                delta = delta.max((b - a).abs() / b);
            }
            drop = drop.max(a - b);
        }
        let barrier_margin = barrier.map(|w| {
            let wn = w.sup_norm();
            w.values()
                .iter()
                .zip(next.values())
                .map(|(a, b)| (a - b) / wn)
                .fold(f64::INFINITY, f64::min)
        });
        trace.records.push(IterationRecord {
            sup_norm: sup,
            rel_delta: delta,
            monotonicity_violation: drop / old_sup,
            barrier_margin,
        });
        growth = if sup > old_sup { growth + 1 } else { 0 };
        if !sup.is_finite() || (sup > cap && growth >= GROWTH_RUN) {
            return Ok(SolveOutcome::Diverged {
                iteration: it,
                sup_norm: sup,
                trace,
            });
        }
        if delta < inst.conv_tol {
            return Ok(SolveOutcome::Converged {
                profile: next,
                iterations: it,
                trace,
            });
        }
        v = next;
    }
    Ok(SolveOutcome::MaxIterations { trace })
}

/// `|v - (G[I_alpha[v^p] v^q] + k Γ_0)|_sup / |v|_sup`.
pub fn fixed_point_residual(v: &RadialProfile, inst: &ProblemInstance, ops: &Operators) -> Result<f64, SolverError> {
    let next = iterate_once(v, inst, ops)?;
    let d = v
        .values()
        .iter()
        .zip(next.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(d / v.sup_norm())
}

/// `G[I_alpha[Φ_0^p] Φ_0^q]`.
pub fn barrier_core(e: &ProblemExponents, ops: &Operators) -> Result<RadialProfile, SolverError> {
    let phi = phi0_profile(e.n(), ops.grid(), 1.0)?;
    nonlinearity(&phi, e, ops)
}

/// `w_t = t k^{p+q} G[I_alpha[Φ_0^p] Φ_0^q] + k Φ_0`.
pub fn barrier(inst: &ProblemInstance, ops: &Operators, t: f64) -> Result<RadialProfile, SolverError> {
    if !(t > 0.0) {
        return Err(SolverError::InvalidInstance(format!("barrier parameter t must be positive (got {t})")));
    }
    let e = &inst.exponents;
    let core = barrier_core(e, ops)?;
    let s = e.p_f64() + e.q_f64();
    let phi = phi0_profile(e.n(), ops.grid(), inst.k)?;
    let w = core.pointwise_scale(t * inst.k.powf(s))?.pointwise_add(&phi)?;
    Ok(w.with_origin_exponent(phi.origin_exponent()))
}

/// Whether the tangency condition holds at `k` with the empirical constant
/// `c_hat`, i.e. whether `w_{t_q}` is a valid barrier.
pub fn barrier_admissible(inst: &ProblemInstance, c_hat: f64) -> Result<bool, SolverError> {
    let e = &inst.exponents;
    Ok(tangency_admissible(c_hat, inst.k, e.p_f64(), e.q_f64())?.admissible)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierConstant {
    pub c_hat: f64,
    /// Node radius where the ratio peaks.
    pub argmax_r: f64,
    /// `k_q` for `c_hat`.
    pub khat_q: f64,
    pub t_q: f64,
}

/// `c_hat = max_r G[I_alpha[Φ_0^p] Φ_0^q](r) / Φ_0(r)` over the grid. A
/// maximum at either end of the grid means the ratio was still growing
/// there, which the continuum bound rules out.
pub fn estimate_barrier_constant(e: &ProblemExponents, ops: &Operators) -> Result<BarrierConstant, SolverError> {
    let report = classify(e);
    if !report.is_subcritical() {
        return Err(SolverError::Supercritical(report.trigger_summary()));
    }
    let core = barrier_core(e, ops)?;
    let phi = phi0_profile(e.n(), ops.grid(), 1.0)?;
    let ratio: Vec<f64> = core.values().iter().zip(phi.values()).map(|(a, b)| a / b).collect();
    let (imax, c_hat) = ratio
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if imax == 0 {
        return Err(SolverError::RatioGrowsAtEnd(GridEnd::Origin));
    }
    if imax + 1 == ratio.len() {
        return Err(SolverError::RatioGrowsAtEnd(GridEnd::Tail));
    }
    let kt = k_threshold(c_hat, e.p_f64(), e.q_f64())?;
    Ok(BarrierConstant {
        c_hat,
        argmax_r: ops.grid().nodes()[imax],
        khat_q: kt.k_q,
        t_q: kt.t_q,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSample {
    pub k: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStarBracket {
    /// Largest `k` observed to converge.
    pub k_conv: f64,
    /// Smallest `k` observed to diverge.
    pub k_div: f64,
    /// Every solve in evaluation order, endpoints first.
    pub samples: Vec<KSample>,
}

/// Bisects `[k_lo, k_hi]` on solver verdicts for `steps` steps. A run
/// that hits `max_iter` is recorded as undetermined and stops the
/// bisection, since it is evidence for neither side.
pub fn estimate_kstar(
    template: &ProblemInstance,
    ops: &Operators,
    k_lo: f64,
    k_hi: f64,
    steps: usize,
) -> Result<KStarBracket, SolverError> {
    if !(k_lo > 0.0 && k_hi > k_lo) {
        return Err(SolverError::InvalidBracket(format!("need 0 < k_lo < k_hi (got {k_lo}, {k_hi})")));
    }
    let verdict = |k: f64| solve_minimal(&template.with_k(k), ops, None).map(|o| o.verdict());
    let (lo_v, hi_v) = rayon::join(|| verdict(k_lo), || verdict(k_hi));
    let (lo_v, hi_v) = (lo_v?, hi_v?);
    let mut samples = vec![KSample { k: k_lo, verdict: lo_v }, KSample { k: k_hi, verdict: hi_v }];
    if lo_v != Verdict::Converged {
        return Err(SolverError::InvalidBracket(format!(
            "k_lo = {k_lo} does not converge ({lo_v:?}); lower k_lo"
        )));
    }
    if hi_v != Verdict::Diverged {
        return Err(SolverError::InvalidBracket(format!(
            "k_hi = {k_hi} does not diverge ({hi_v:?}); raise k_hi"
        )));
    }
    let (mut lo, mut hi) = (k_lo, k_hi);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let v = verdict(mid)?;
        samples.push(KSample { k: mid, verdict: v });
        match v {
            Verdict::Converged => lo = mid,
            Verdict::Diverged => hi = mid,
            Verdict::Undetermined => break,
        }
    }
    Ok(KStarBracket {
        k_conv: lo,
        k_div: hi,
        samples,
    })
}

/// Solves at each `k` concurrently; results in input order.
pub fn solve_many(template: &ProblemInstance, ops: &Operators, ks: &[f64]) -> Result<Vec<SolveOutcome>, SolverError> {
    ks.par_iter()
        .map(|&k| solve_minimal(&template.with_k(k), ops, None))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::build_grid;
    use crate::rational::{int, rat};

    fn exps(n: u32, alpha: i64, p: (i64, i64), q: i64) -> ProblemExponents {
        ProblemExponents::new(n, int(alpha), rat(p.0, p.1), int(q)).unwrap()
    }

    fn setup(ppd: u32) -> (ProblemExponents, Operators) {
        let e = exps(3, 2, (2, 1), 1);
        let g = build_grid(1e-4, 30.0, ppd).unwrap();
        let ops = Operators::assemble(&e, &g).unwrap();
        (e, ops)
    }

    #[test]
    fn zero_input_gives_k_gamma0() {
        let (e, ops) = setup(20);
        let inst = ProblemInstance::new(e, 0.3);
        let zero = RadialProfile::zeros(ops.grid()).with_origin_exponent(Some(1.0));
        let out = iterate_once(&zero, &inst, &ops).unwrap();
        let base = gamma0_profile(3, ops.grid(), 0.3).unwrap();
        assert_eq!(out.values(), base.values());
    }

    #[test]
    fn first_step_increases() {
        let (e, ops) = setup(20);
        let inst = ProblemInstance::new(e, 0.3);
        let v0 = gamma0_profile(3, ops.grid(), 0.3).unwrap();
        let v1 = iterate_once(&v0, &inst, &ops).unwrap();
        assert!(v1.values().iter().zip(v0.values()).all(|(a, b)| a >= b));
        assert!(v1.values().iter().zip(v0.values()).any(|(a, b)| a > b));
    }

    #[test]
    fn case_two_origin_is_not_integrable() {
        let e = exps(3, 2, (3, 1), 1);
        let g = build_grid(1e-4, 30.0, 20).unwrap();
        let ops = Operators::assemble(&e, &g).unwrap();
        let inst = ProblemInstance::new(e, 0.1);
        let v0 = gamma0_profile(3, &g, 0.1).unwrap();
        assert!(matches!(
            iterate_once(&v0, &inst, &ops),
            Err(SolverError::Radial(RadialError::NonIntegrableOrigin { .. }))
        ));
        assert!(matches!(
            solve_minimal(&inst, &ops, None),
            Err(SolverError::Supercritical(_))
        ));
    }

    #[test]
    fn barrier_dominates_phi0_and_gamma0() {
        let (e, ops) = setup(20);
        let inst = ProblemInstance::new(e, 0.2);
        let w = barrier(&inst, &ops, 3.0).unwrap();
        let phi = phi0_profile(3, ops.grid(), 0.2).unwrap();
        let gam = gamma0_profile(3, ops.grid(), 0.2).unwrap();
        for ((w, f), g) in w.values().iter().zip(phi.values()).zip(gam.values()) {
            assert!(w >= f && f >= g);
        }
        assert!(barrier(&inst, &ops, 0.0).is_err());
    }

    #[test]
    fn barrier_constant_and_admissibility() {
        let (e, ops) = setup(20);
        let bc = estimate_barrier_constant(&e, &ops).unwrap();
        assert!(bc.c_hat > 0.0 && bc.c_hat.is_finite());
        let at = ProblemInstance::new(e.clone(), bc.khat_q);
        assert!(barrier_admissible(&at, bc.c_hat).unwrap());
        assert!(!barrier_admissible(&at.with_k(1.01 * bc.khat_q), bc.c_hat).unwrap());
    }

    #[test]
    fn small_k_converges_and_large_k_diverges() {
        let (e, ops) = setup(20);
        let bc = estimate_barrier_constant(&e, &ops).unwrap();
        let inst = ProblemInstance::new(e, 0.5 * bc.khat_q);
        let out = solve_minimal(&inst, &ops, None).unwrap();
        let SolveOutcome::Converged { profile, iterations, trace } = out else {
            panic!("not converged: {:?}", out.verdict());
        };
        assert!(iterations <= 200);
        assert!(trace.max_monotonicity_violation() <= 1e-8);
        assert!(fixed_point_residual(&profile, &inst, &ops).unwrap() <= 2.0 * inst.conv_tol);
        let big = solve_minimal(&inst.with_k(100.0), &ops, None).unwrap();
        assert_eq!(big.verdict(), Verdict::Diverged);
    }

    #[test]
    fn correction_scales_like_k_to_the_p_plus_q() {
        let (e, ops) = setup(20);
        let inst = ProblemInstance::new(e, 1.0);
        let ratio = |k: f64| {
            let out = solve_minimal(&inst.with_k(k), &ops, None).unwrap();
            let u = out.profile().unwrap().clone();
            let base = gamma0_profile(3, ops.grid(), k).unwrap();
            let d = u
                .values()
                .iter()
                .zip(base.values())
                .map(|(a, b)| a - b)
                .fold(0.0, f64::max);
            d / k.powi(3)
        };
        let (a, b) = (ratio(1e-2), ratio(1e-3));
        assert!(a > 0.0 && b > 0.0);
        assert!((a / b - 1.0).abs() < 0.05, "{a} {b}");
    }

    #[test]
    fn bracket_validation() {
        let (e, ops) = setup(20);
        let inst = ProblemInstance::new(e, 1.0);
        assert!(matches!(
            estimate_kstar(&inst, &ops, 1e-3, 2e-3, 2),
            Err(SolverError::InvalidBracket(_))
        ));
        assert!(estimate_kstar(&inst, &ops, 2.0, 1.0, 2).is_err());
    }

    #[test]
    fn coarse_grids_are_rejected() {
        assert!(check_grid(&build_grid(1e-2, 30.0, 10).unwrap()).is_err());
        assert!(check_grid(&build_grid(1e-4, 10.0, 10).unwrap()).is_err());
        assert!(check_grid(&build_grid(1e-4, 30.0, 10).unwrap()).is_ok());
    }
}

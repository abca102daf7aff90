//! Asymptotics read off computed profiles: the origin limit of
//! `u(r) r^{N-2}`, exponential decay, the lower bound `u >= k Γ_0`, slopes of
//! the rate transfer, and nonintegrability probes for supercritical
//! exponents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{
    bootstrap_t1, classify, green_rate, riesz_rate, supercritical_density_exponent, t_sequence, BootstrapCase,
    ExponentError, ProblemExponents, SingularityRate,
};
use crate::kernels::{gamma0, KernelError};
use crate::radial::{assemble, build_grid, OperatorKind, RadialError, RadialGrid, RadialProfile, TailModel};
use crate::rational::{format_rational, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("profile has no N-2 singularity at the origin")]
    NoSingularity,
    #[error("u r^(N-2) is not monotone on the fit window (under-resolved grid?)")]
    NonMonotone,
    #[error("fit window [{0}, {1}] holds fewer than 4 nodes")]
    WindowTooSmall(f64, f64),
    #[error("profile vanishes on the tail window")]
    VanishingTail,
    #[error("epsilons must be a decreasing list of at least 3 values in (0, 1)")]
    BadEpsilons,
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

/// Least squares line `y ≈ a + b x`; returns `(a, b, rms residual)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / m).sqrt();
    (a, b, rms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityFit {
    /// `lim_{r -> 0} u(r) r^{N-2}`
    pub limit_estimate: f64,
    pub window: (f64, f64),
    pub correction_exponent: f64,
    pub residual: f64,
    /// `residual <= 1e-3 |limit_estimate|`
    pub accepted: bool,
}

/// Correction exponent `min(T_1 - T_0, 2)` from the bootstrap ladder, when
/// the exponents have a finite `t_1`.
pub fn ladder_correction_exponent(e: &ProblemExponents) -> Option<f64> {
    let (_, case) = bootstrap_t1(e).ok()?;
    if case != BootstrapCase::PAboveAlphaCritical {
        return None;
    }
    let t = t_sequence(e).ok()?;
    Some(to_f64(&(&t.values[1] - &t.values[0])).min(2.0))
}

/// Fits `u(r) r^{N-2} ≈ a + b r^beta` on `[r_1, min(10 r_1, 0.05)]`. With
/// `beta = None` the exponent is chosen in `(0, 3]` by least residual.
pub fn fit_origin(profile: &RadialProfile, n: u32, beta: Option<f64>) -> Result<SingularityFit, AsymptoticsError> {
    let grid = profile.grid();
    let r1 = grid.nodes()[0];
    let (ra, rb) = (r1, (10.0 * r1).min(0.05));
    let idx = grid.window(ra, rb * (1.0 + 1e-12));
    if idx.len() < 4 {
        return Err(AsymptoticsError::WindowTooSmall(ra, rb));
    }
    let nf = n as f64;
    let rs = &grid.nodes()[idx.clone()];
    let g: Vec<f64> = rs
        .iter()
        .zip(&profile.values()[idx])
        .map(|(r, u)| u * r.powf(nf - 2.0))
        .collect();
    let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if gmax == 0.0 {
        return Err(AsymptoticsError::NoSingularity);
    }
    let diffs: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
    let slack = 1e-9 * gmax;
    let up = diffs.iter().any(|&d| d > slack);
    let down = diffs.iter().any(|&d| d < -slack);
    if up && down {
        return Err(AsymptoticsError::NonMonotone);
    }
    let fit = |b: f64| {
        let x: Vec<f64> = rs.iter().map(|r| (r / r1).powf(b)).collect();
        let (a, c, rms) = line_fit(&x, &g);
        // a + c (r/r_1)^b -> a as r -> 0
        (a, c, rms)
    };
    let beta = match beta {
        Some(b) => b,
        None => {
            let score = |b: f64| fit(b).2;
            let mut best = (f64::INFINITY, 1.0);
            for i in 1..=300 {
                let b = i as f64 * 0.01;
                let s = score(b);
                if s < best.0 {
                    best = (s, b);
                }
            }
            // golden-section polish on the bracketing interval
            let (mut lo, mut hi) = ((best.1 - 0.01).max(1e-3), best.1 + 0.01);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..40 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if score(m1) < score(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            0.5 * (lo + hi)
        }
    };
    let (a, _, rms) = fit(beta);
    Ok(SingularityFit {
        limit_estimate: a,
        window: (ra, rb),
        correction_exponent: beta,
        residual: rms,
        accepted: rms <= 1e-3 * a.abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub algebraic_power: f64,
    pub window: (f64, f64),
    pub residual: f64,
}

/// Least squares `ln u ≈ c - rate r - m ln r` on `[max(r_max/2, 10), r_max]`.
pub fn fit_decay(profile: &RadialProfile) -> Result<DecayFit, AsymptoticsError> {
    let grid = profile.grid();
    let rmax = grid.r_max();
    let ra = (rmax / 2.0).max(10.0);
    let idx = grid.window(ra, rmax);
    if idx.len() < 4 {
        return Err(AsymptoticsError::WindowTooSmall(ra, rmax));
    }
    let rs = &grid.nodes()[idx.clone()];
    let us = &profile.values()[idx];
    if us.iter().any(|&u| u <= 0.0) {
        return Err(AsymptoticsError::VanishingTail);
    }
    // normal equations for (c, rate, m)
    let rows: Vec<[f64; 3]> = rs.iter().map(|&r| [1.0, -r, -r.ln()]).collect();
    let y: Vec<f64> = us.iter().map(|u| u.ln()).collect();
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (row, yi) in rows.iter().zip(&y) {
        for i in 0..3 {
            aty[i] += row[i] * yi;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let sol = solve3(ata, aty);
    let rms = (rows
        .iter()
        .zip(&y)
        .map(|(row, yi)| (yi - row.iter().zip(&sol).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum::<f64>()
        / y.len() as f64)
        .sqrt();
    Ok(DecayFit {
        rate: sol[1],
        algebraic_power: sol[2],
        window: (ra, rmax),
        residual: rms,
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, y) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * y;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Whether `u(r) e^{theta r}` is nonincreasing on the decay window, up to a
/// relative slack of `1e-9`.
pub fn tail_weighted_nonincreasing(profile: &RadialProfile, theta: f64) -> bool {
    let grid = profile.grid();
    let rmax = grid.r_max();
    let idx = grid.window((rmax / 2.0).max(10.0), rmax);
    let w: Vec<f64> = grid.nodes()[idx.clone()]
        .iter()
        .zip(&profile.values()[idx])
        .map(|(r, u)| u * (theta * r).exp())
        .collect();
    w.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-9))
}

/// `max_i (k Γ_0(r_i) - u_i)_+ / (k Γ_0(r_i))`.
pub fn check_lower_bound(profile: &RadialProfile, k: f64, n: u32) -> Result<f64, AsymptoticsError> {
    let mut worst = 0.0f64;
    for (&r, &u) in profile.grid().nodes().iter().zip(profile.values()) {
        let b = k * gamma0(n, r)?;
        if b > 0.0 {
            worst = worst.max((b - u).max(0.0) / b);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Power,
    Log,
    Bounded,
}

impl Branch {
    pub fn of(rate: &SingularityRate) -> Self {
        match rate {
            SingularityRate::PowerBound(_) => Branch::Power,
            SingularityRate::LogBound => Branch::Log,
            SingularityRate::Bounded => Branch::Bounded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub operator: OperatorKind,
    pub predicted: SingularityRate,
    pub branch: Branch,
    /// `-d ln u / d ln r` near the origin from the power-law fit.
    pub exponent: f64,
    pub power_residual: f64,
    pub log_residual: f64,
    /// `u(r_1) / u(10 r_1) - 1`
    pub decade_change: f64,
    pub pass: bool,
}

/// Classifies the origin behaviour of `u` on `[r_1, 100 r_1]`: bounded when
/// `u` changes by less than 5% over the first decade, otherwise the better
/// (by residual in `ln u`) of `u ≈ C r^{-e}` and `u ≈ a + b ln(1/r)`.
pub fn classify_origin(u: &RadialProfile) -> (Branch, f64, f64, f64, f64) {
    let grid = u.grid();
    let r1 = grid.nodes()[0];
    let idx = grid.window(r1, 100.0 * r1 * (1.0 + 1e-12));
    let rs = &grid.nodes()[idx.clone()];
    let vs = &u.values()[idx];
    let lx: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let (_, slope, power_res) = line_fit(&lx, &ly);
    let minus_log: Vec<f64> = lx.iter().map(|x| -x).collect();
    let (a, b, _) = line_fit(&minus_log, vs);
    let log_res = (minus_log
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let f = a + b * x;
            if f > 0.0 {
                (y - f.ln()).powi(2)
            } else {
                f64::INFINITY
            }
        })
        .sum::<f64>()
        / ly.len() as f64)
        .sqrt();
    let j10 = grid.nearest(10.0 * r1);
    let change = u.values()[0] / u.values()[j10] - 1.0;
    let branch = if change.abs() < 0.05 {
        Branch::Bounded
    } else if log_res < power_res && b > 0.0 {
        Branch::Log
    } else {
        Branch::Power
    };
    (branch, -slope, power_res, log_res, change)
}

/// `V_tau = r^{-tau}` for `r <= 1`, `e^{-r}` beyond.
pub fn test_profile(grid: &RadialGrid, tau: f64) -> Result<RadialProfile, RadialError> {
    RadialProfile::from_fn(
        grid,
        |r| if r <= 1.0 { r.powf(-tau) } else { (-r).exp() },
        Some(tau),
        TailModel::ExpDecay { rate: 1.0, power: 0.0 },
    )
}

/// Slope check of `G[V_tau]` (`alpha = None`) or `I_alpha[V_tau]` against
/// the predicted rate.
pub fn check_transfer(
    n: u32,
    alpha: Option<&Rational>,
    tau: &Rational,
    grid: &RadialGrid,
) -> Result<SlopeCheck, AsymptoticsError> {
    let input = SingularityRate::power(tau.clone());
    let (kind, predicted) = match alpha {
        None => (OperatorKind::Green, green_rate(&input, n)?),
        Some(a) => (OperatorKind::Riesz { alpha: to_f64(a) }, riesz_rate(&input, a, n)?),
    };
    let op = assemble(kind, n, grid)?;
    let out = op.apply(&test_profile(grid, to_f64(tau))?)?;
    let (branch, exponent, power_residual, log_residual, decade_change) = classify_origin(&out);
    let expected = Branch::of(&predicted);
    let pass = branch == expected
        && match &predicted {
            SingularityRate::PowerBound(e) => (exponent - to_f64(e)).abs() <= 0.05,
            _ => true,
        };
    Ok(SlopeCheck {
        operator: kind,
        predicted,
        branch,
        exponent,
        power_residual,
        log_residual,
        decade_change,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTransfer {
    pub green: SlopeCheck,
    pub riesz: SlopeCheck,
}

/// Origin slopes of `G[V_tau]` and `I_alpha[V_tau]` against the predicted
/// rates.
pub fn verify_rate_transfer(n: u32, alpha: &Rational, tau: &Rational, grid: &RadialGrid) -> Result<RateTransfer, AsymptoticsError> {
    Ok(RateTransfer {
        green: check_transfer(n, None, tau, grid)?,
        riesz: check_transfer(n, Some(alpha), tau, grid)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthClass {
    Convergent,
    LogDivergent,
    PowerDivergent { rate: f64 },
    /// `I_alpha[Γ_0^p]` itself is infinite; no outer integral is formed.
    InnerDivergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub epsilons: Vec<f64>,
    pub partial_integrals: Vec<f64>,
    pub growth_class: GrowthClass,
    /// `(2-N)(p+q) + alpha`
    pub density_exponent: String,
    /// Growth rate of the increments `F(eps_{i+1}) - F(eps_i)` against
    /// `ln(1/eps)`: negative for convergence, near 0 for log divergence.
    pub increment_rate: Option<f64>,
}

impl ProbeReport {
    /// Whether the numerical class agrees with the exponent arithmetic of
    /// the integrand (see [`probe_divergence_rate`]).
    pub fn consistent(&self, e: &ProblemExponents) -> bool {
        let rate = probe_divergence_rate(e);
        match self.growth_class {
            GrowthClass::InnerDivergent => classify(e).triggers.contains(&crate::exponents::Trigger::P),
            GrowthClass::Convergent => rate.is_some_and(|r| r < 0.0),
            GrowthClass::LogDivergent => rate == Some(0.0),
            GrowthClass::PowerDivergent { rate: got } => rate.is_some_and(|r| r > 0.0 && (got - r).abs() < 0.2),
        }
    }
}

/// Exponent `rho` with `F(eps) ~ eps^{-rho}` (`0`: logarithmic), or `None`
/// when the inner potential is infinite.
///
/// Near the origin `J ~ r^{alpha - p(N-2)}` when `p(N-2) > alpha`, `~ ln(1/r)`
/// at equality and bounded below it, so `rho = (p(N-2) - alpha)_+ + q(N-2) - N`.
/// When `p(N-2) >= alpha` this is `-((2-N)(p+q) + alpha + N)`.
pub fn probe_divergence_rate(e: &ProblemExponents) -> Option<f64> {
    let n = e.n_rat();
    let pn = e.p() * (&n - Rational::from_integer(2.into()));
    if pn >= n {
        return None;
    }
    let rho = if &pn >= e.alpha() {
        -(supercritical_density_exponent(e).exponent + &n)
    } else {
        e.q() * (&n - Rational::from_integer(2.into())) - &n
    };
    Some(to_f64(&rho))
}

/// Probes `F(eps) = ∫_eps^1 J(r) Γ_0(r)^q r^{N-1} dr` with
/// `J = ∫_{B_1} Γ_0(|y|)^p |x - y|^{alpha-N} dy`.
///
/// The increments of `F` over successive epsilons, per unit of
/// `ln(1/eps)`, are regressed on `ln(1/eps)` (power growth `eps^{-rate}`)
/// and on `ln ln(1/eps)` (growth like a power of the logarithm). A slope
/// below `-0.1` is convergence; a slope within `0.1` of 0, or a better
/// logarithmic fit, a log divergence; otherwise a power divergence at that
/// rate. When `p >= N/(N-2)`, `J` is infinite and the probe stops there.
pub fn integrability_probe(e: &ProblemExponents, epsilons: &[f64]) -> Result<ProbeReport, AsymptoticsError> {
    if epsilons.len() < 3
        || epsilons.iter().any(|&x| !(x > 0.0 && x < 1.0))
        || epsilons.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(AsymptoticsError::BadEpsilons);
    }
    let d = supercritical_density_exponent(e);
    let density_exponent = format_rational(&d.exponent);
    let n = e.n();
    let nf = e.n_f64();
    let (p, q) = (e.p_f64(), e.q_f64());
    if probe_divergence_rate(e).is_none() {
        return Ok(ProbeReport {
            epsilons: epsilons.to_vec(),
            partial_integrals: Vec::new(),
            growth_class: GrowthClass::InnerDivergent,
            density_exponent,
            increment_rate: None,
        });
    }
    let eps_min = *epsilons.last().unwrap();
    let grid = build_grid(eps_min / 10.0, 10.0, 20)?;
    let ball = RadialProfile::from_fn(
        &grid,
        |r| if r < 1.0 { gamma0(n, r).unwrap_or(0.0).powf(p) } else { 0.0 },
        Some(p * (nf - 2.0)),
        TailModel::Zero,
    )?;
    let riesz = assemble(OperatorKind::Riesz { alpha: e.alpha_f64() }, n, &grid)?;
    let j = riesz.apply_values(ball.values(), p * (nf - 2.0), TailModel::Zero)?;
    // integrand in t = ln r: J Γ_0^q r^N
    let h = grid.log_step();
    let dens: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&j)
        .map(|(&r, &jr)| Ok(jr * gamma0(n, r)?.powf(q) * r.powf(nf)))
        .collect::<Result<_, KernelError>>()?;
    let t_of = |r: f64| (r / grid.r_min()).ln() / h;
    // trapezoid from eps to 1, with linear interpolation of the density
    // in t at the two ends
    let at = |t: f64| {
        let i = (t.floor() as usize).min(dens.len() - 2);
        let f = t - i as f64;
        dens[i] * (1.0 - f) + dens[i + 1] * f
    };
    let integral = |eps: f64| {
        let (ta, tb) = (t_of(eps), t_of(1.0));
        let (ia, ib) = (ta.ceil() as usize, tb.floor() as usize);
        let mut s = 0.5 * (at(ta) + dens[ia]) * (ia as f64 - ta) + 0.5 * (dens[ib] + at(tb)) * (tb - ib as f64);
        for i in ia..ib {
            s += 0.5 * (dens[i] + dens[i + 1]);
        }
        s * h
    };
    let partial: Vec<f64> = epsilons.iter().map(|&x| integral(x)).collect();
    let lx: Vec<f64> = epsilons[1..].iter().map(|x| -x.ln()).collect();
    let incr: Vec<f64> = partial.windows(2).map(|w| w[1] - w[0]).collect();
    let growth_class;
    let rate;
    if incr.iter().any(|&v| v <= 0.0) {
        rate = None;
        growth_class = GrowthClass::Convergent;
    } else {
        // increments per unit of ln(1/eps)
        let widths: Vec<f64> = epsilons.windows(2).map(|w| (w[0] / w[1]).ln()).collect();
        let li: Vec<f64> = incr.iter().zip(&widths).map(|(v, w)| (v / w).ln()).collect();
        let (_, slope, power_res) = line_fit(&lx, &li);
        // polylogarithmic growth: increments ~ ln(1/eps)^m
        let llx: Vec<f64> = lx.iter().map(|x| x.ln()).collect();
        let (_, _, log_res) = line_fit(&llx, &li);
        rate = Some(slope);
        growth_class = if slope < -0.1 {
            GrowthClass::Convergent
        } else if slope <= 0.1 || log_res < power_res {
            GrowthClass::LogDivergent
        } else {
            GrowthClass::PowerDivergent { rate: slope }
        };
    }
    Ok(ProbeReport {
        epsilons: epsilons.to_vec(),
        partial_integrals: partial,
        growth_class,
        density_exponent,
        increment_rate: rate,
    })
}

/// Default probe epsilons `10^{-1}, ..., 10^{-8}`.
pub fn default_epsilons() -> Vec<f64> {
    (1..=8).map(|i| 10f64.powi(-i)).collect()
}

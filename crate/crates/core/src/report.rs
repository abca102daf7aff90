//! JSON reports on computed profiles and the plot-ready CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    check_lower_bound, default_epsilons, fit_decay, fit_origin, integrability_probe, ladder_correction_exponent,
    tail_weighted_nonincreasing, ProbeReport,
};
use crate::exponents::ProblemExponents;
use crate::kernels::{c_n, gamma0};
use crate::radial::io::{format_float, GridSpec};
use crate::radial::{RadialGrid, RadialProfile};
use crate::rational::format_rational;
use crate::solver::{BarrierConstant, IterationTrace, SolveOutcome, Verdict};

/// Decay weight `e^{theta r}` of the tail monotonicity check.
pub const TAIL_THETA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub limit: f64,
    #[serde(rename = "c_N_times_k")]
    pub c_n_times_k: f64,
    pub rel_err: f64,
    pub correction_exponent: f64,
    pub window: (f64, f64),
    pub residual: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rate: f64,
    pub power: f64,
    pub window: (f64, f64),
    pub residual: f64,
    /// `u(r) e^{0.3 r}` nonincreasing on the window.
    pub weighted_nonincreasing: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub singularity: Option<SingularityReport>,
    pub decay: Option<DecayReport>,
    pub lower_bound_violation: Option<f64>,
    pub probes: Vec<ProbeReport>,
    /// Analyses that could not be carried out, with the reason.
    pub issues: Vec<String>,
}

/// Runs every analysis on `profile`, collecting failures as issues. With
/// exponents, the origin fit uses the ladder correction exponent and the
/// integrability probe is included.
pub fn analyze_profile(profile: &RadialProfile, n: u32, k: f64, e: Option<&ProblemExponents>) -> ProfileReport {
    let mut out = ProfileReport::default();
    let beta = e.and_then(ladder_correction_exponent);
    match fit_origin(profile, n, beta) {
        Ok(fit) => {
            let target = c_n(n) * k;
            out.singularity = Some(SingularityReport {
                limit: fit.limit_estimate,
                c_n_times_k: target,
                rel_err: (fit.limit_estimate / target - 1.0).abs(),
                correction_exponent: fit.correction_exponent,
                window: fit.window,
                residual: fit.residual,
                accepted: fit.accepted,
            });
        }
        Err(err) => out.issues.push(format!("singularity: {err}")),
    }
    match fit_decay(profile) {
        Ok(fit) => {
            out.decay = Some(DecayReport {
                rate: fit.rate,
                power: fit.algebraic_power,
                window: fit.window,
                residual: fit.residual,
                weighted_nonincreasing: tail_weighted_nonincreasing(profile, TAIL_THETA),
            })
        }
        Err(err) => out.issues.push(format!("decay: {err}")),
    }
    match check_lower_bound(profile, k, n) {
        Ok(v) => out.lower_bound_violation = Some(v),
        Err(err) => out.issues.push(format!("lower bound: {err}")),
    }
    if let Some(e) = e {
        match integrability_probe(e, &default_epsilons()) {
            Ok(p) => out.probes.push(p),
            Err(err) => out.issues.push(format!("probe: {err}")),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentsJson {
    #[serde(rename = "N")]
    pub n: u32,
    pub alpha: String,
    pub p: String,
    pub q: String,
}

impl From<&ProblemExponents> for ExponentsJson {
    fn from(e: &ProblemExponents) -> Self {
        Self {
            n: e.n(),
            alpha: format_rational(e.alpha()),
            p: format_rational(e.p()),
            q: format_rational(e.q()),
        }
    }
}

pub fn grid_spec(g: &RadialGrid) -> GridSpec {
    GridSpec {
        r_min: g.r_min(),
        r_max: g.requested_r_max(),
        points_per_decade: g.points_per_decade(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub verdict: Verdict,
    pub exponents: ExponentsJson,
    pub k: f64,
    pub grid: GridSpec,
    pub iterations: usize,
    pub barrier: Option<BarrierConstant>,
    /// Whether the barrier argument covers this `k`.
    pub barrier_admissible: Option<bool>,
    pub max_monotonicity_violation: f64,
    pub min_barrier_margin: Option<f64>,
    pub fixed_point_residual: Option<f64>,
    #[serde(flatten)]
    pub analysis: ProfileReport,
}

impl SolveReport {
    pub fn new(
        e: &ProblemExponents,
        k: f64,
        grid: &RadialGrid,
        outcome: &SolveOutcome,
        barrier: Option<BarrierConstant>,
        fixed_point_residual: Option<f64>,
    ) -> Self {
        let trace = outcome.trace();
        let analysis = match outcome.profile() {
            Some(u) => analyze_profile(u, e.n(), k, Some(e)),
            None => ProfileReport::default(),
        };
        Self {
            verdict: outcome.verdict(),
            exponents: e.into(),
            k,
            grid: grid_spec(grid),
            iterations: trace.records.len(),
            barrier,
            barrier_admissible: barrier.map(|b| k <= b.khat_q),
            max_monotonicity_violation: trace.max_monotonicity_violation(),
            min_barrier_margin: trace.min_barrier_margin(),
            fixed_point_residual,
            analysis,
        }
    }
}

/// Per-iteration arrays of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceJson {
    pub verdict: Verdict,
    pub iterations: usize,
    pub sup_norm: Vec<f64>,
    pub rel_delta: Vec<f64>,
    pub monotonicity_violation: Vec<f64>,
    pub barrier_margin: Vec<Option<f64>>,
}

impl TraceJson {
    pub fn new(verdict: Verdict, trace: &IterationTrace) -> Self {
        let r = &trace.records;
        Self {
            verdict,
            iterations: r.len(),
            sup_norm: r.iter().map(|x| x.sup_norm).collect(),
            rel_delta: r.iter().map(|x| x.rel_delta).collect(),
            monotonicity_violation: r.iter().map(|x| x.monotonicity_violation).collect(),
            barrier_margin: r.iter().map(|x| x.barrier_margin).collect(),
        }
    }
}

/// Columns `r, u, u r^{N-2}, k Γ_0(r)`.
pub fn plot_csv(profile: &RadialProfile, n: u32, k: f64) -> String {
    let mut out = String::from("r,u,u_r_pow_N_minus_2,k_gamma0\n");
    for (&r, &u) in profile.grid().nodes().iter().zip(profile.values()) {
        let g = gamma0(n, r).map(|g| k * g).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_float(r),
            format_float(u),
            format_float(u * r.powi(n as i32 - 2)),
            format_float(g)
        );
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::build_grid;
    use crate::solver::gamma0_profile;

    #[test]
    fn gamma0_profile_report() {
        let g = build_grid(1e-4, 30.0, 40).unwrap();
        let u = gamma0_profile(3, &g, 0.7).unwrap();
        let rep = analyze_profile(&u, 3, 0.7, None);
        let s = rep.singularity.clone().unwrap();
        assert!(s.rel_err < 1e-6, "{}", s.rel_err);
        let d = rep.decay.clone().unwrap();
        assert!((d.rate - 1.0).abs() < 0.01 && (d.power - 1.0).abs() < 0.01);
        assert!(d.weighted_nonincreasing);
        assert_eq!(rep.lower_bound_violation, Some(0.0));
        assert!(rep.issues.is_empty());
        let json = to_json(&rep);
        assert!(json.contains("\"c_N_times_k\""));
    }

    #[test]
    fn zero_profile_is_reported_not_fatal() {
        let g = build_grid(1e-4, 30.0, 20).unwrap();
        let rep = analyze_profile(&RadialProfile::zeros(&g), 3, 1.0, None);
        assert!(rep.singularity.is_none() && rep.decay.is_none());
        assert_eq!(rep.issues.len(), 2);
        assert_eq!(rep.lower_bound_violation, Some(1.0));
    }

    #[test]
    fn plot_csv_columns() {
        let g = build_grid(1e-4, 30.0, 8).unwrap();
        let u = gamma0_profile(3, &g, 2.0).unwrap();
        let csv = plot_csv(&u, 3, 2.0);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("r,u,u_r_pow_N_minus_2,k_gamma0"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first[1], first[3]);
        assert!((first[2] / (2.0 / (4.0 * std::f64::consts::PI)) - 1.0).abs() < 1e-3);
        assert_eq!(csv.lines().count(), g.len() + 1);
    }
}

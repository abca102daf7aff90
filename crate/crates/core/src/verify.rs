//! Self-check suites behind `choquard verify`. Each check carries its
//! expected value inline; the suites never compare the library with itself.

use std::f64::consts::{E, PI};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::asymptotics::verify_rate_transfer;
use crate::exponents::{bootstrap_ledger, classify, s_sequence, CriticalityClass, ProblemExponents, Trigger};
use crate::kernels::{c_n, gamma0, gamma0_residual, phi0};
use crate::radial::io::format_float;
use crate::radial::{
    assemble, build_grid, radial_operator_fd, FdOrder, OperatorKind, RadialGrid, RadialProfile, TailModel,
};
use crate::rational::{format_rational, int, parse_rational, powi, rat, Rational};
use crate::special::{bessel_k, gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernels,
    Operators,
    Rates,
    Bootstrap,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kernels" => Ok(Suite::Kernels),
            "operators" => Ok(Suite::Operators),
            "rates" => Ok(Suite::Rates),
            "bootstrap" => Ok(Suite::Bootstrap),
            _ => Err(format!("unknown suite `{s}` (kernels, operators, rates, bootstrap)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Kernels => kernel_checks(),
        Suite::Operators => operator_checks(),
        Suite::Rates => rate_checks(),
        Suite::Bootstrap => {
            let mut v = classification_checks();
            v.extend(ledger_checks());
            v
        }
    }
}

/// TAP version 13 rendering.
pub fn tap(checks: &[Check]) -> String {
    let mut out = format!("TAP version 13\n1..{}\n", checks.len());
    for (i, c) in checks.iter().enumerate() {
        let status = if c.pass { "ok" } else { "not ok" };
        let _ = writeln!(out, "{status} {} - {} # {}", i + 1, c.name, c.detail);
    }
    out
}

fn log_samples(a: f64, b: f64, m: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..m).map(|i| (la + (lb - la) * i as f64 / (m - 1) as f64).exp()).collect()
}

fn max_by<F: Fn(f64) -> Result<f64, crate::kernels::KernelError>>(rs: &[f64], f: F) -> Result<f64, String> {
    rs.iter()
        .map(|&r| f(r).map_err(|e| e.to_string()))
        .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
}

pub fn kernel_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let rs = log_samples(1e-3, 20.0, 400);

    let name = "gamma0(3, r) equals e^-r/(4 pi r) to 1e-10 on [1e-3, 20]";
    out.push(match max_by(&rs, |r| Ok((gamma0(3, r)? / ((-r).exp() / (4.0 * PI * r)) - 1.0).abs())) {
        Ok(m) => Check::new(name, m <= 1e-10, format!("max rel {m:.3e}")),
        Err(e) => Check::failed(name, e),
    });

    let name = "phi0(3, r) equals e^-(r/2)/(4 pi r) to 1e-10";
    out.push(match max_by(&rs, |r| Ok((phi0(3, r)? / ((-r / 2.0).exp() / (4.0 * PI * r)) - 1.0).abs())) {
        Ok(m) => Check::new(name, m <= 1e-10, format!("max rel {m:.3e}")),
        Err(e) => Check::failed(name, e),
    });

    for (nu, x, exact) in [
        (0.5, 1.0, (PI / 2.0).sqrt() * (-1.0f64).exp()),
        (1.5, 2.0, (PI / 4.0).sqrt() * (-2.0f64).exp() * 1.5),
    ] {
        let name = format!("bessel_k({nu}, {x}) half-integer closed form");
        out.push(match bessel_k(nu, x) {
            Ok(v) => {
                let rel = (v / exact - 1.0).abs();
                Check::new(name, rel <= 1e-12, format!("{v:.12} rel {rel:.1e}"))
            }
            Err(e) => Check::failed(name, e),
        });
    }

    for n in [3u32, 4, 5] {
        let name = format!("c_N({n}) from r^(N-2) gamma0 as r -> 0 to 1e-6");
        // Richardson step removes a linear correction in r.
        let g = |r: f64| gamma0(n, r).map(|v| v * r.powi(n as i32 - 2));
        let exact = gamma(n as f64 / 2.0 - 1.0) / (4.0 * PI.powf(n as f64 / 2.0));
        out.push(match (g(1e-6), g(1e-7)) {
            (Ok(a), Ok(b)) => {
                let est = (10.0 * b - a) / 9.0;
                let rel = (est / exact - 1.0).abs();
                let rel_cn = (c_n(n) / exact - 1.0).abs();
                Check::new(
                    name,
                    rel <= 1e-6 && rel_cn <= 1e-14,
                    format!("extrapolated {est:.10e}, exact {exact:.10e}, rel {rel:.1e}"),
                )
            }
            (Err(e), _) | (_, Err(e)) => Check::failed(name, e),
        });
    }

    for n in [3u32, 4, 5, 6] {
        let name = format!("gamma0 radial equation residual N={n} below 1e-8");
        out.push(match max_by(&rs, |r| gamma0_residual(n, r)) {
            Ok(m) => Check::new(name, m <= 1e-8, format!("max rel {m:.3e}")),
            Err(e) => Check::failed(name, e),
        });
    }

    for n in [3u32, 4, 5, 6] {
        let name = format!("gamma0 <= phi0 with ratio -> 1 at 0 and -> 0 at infinity, N={n}");
        let ratios: Result<Vec<f64>, _> = rs.iter().map(|&r| Ok::<_, crate::kernels::KernelError>(gamma0(n, r)? / phi0(n, r)?)).collect();
        out.push(match ratios {
            Ok(q) => {
                let (first, last) = (q[0], *q.last().unwrap());
                let bounded = q.iter().all(|&v| v <= 1.0);
                let monotone = q.windows(2).all(|w| w[1] <= w[0]);
                Check::new(
                    name,
                    bounded && monotone && first > 0.999 && last < 1e-3,
                    format!("ratio {first:.6} at 1e-3, {last:.3e} at 20"),
                )
            }
            Err(e) => Check::failed(name, e),
        });
    }

    for n in [3u32, 4, 5, 6] {
        let name = format!("phi0 r^((N-1)/2) e^(r/2) levels off at infinity, N={n}");
        let w = |r: f64| phi0(n, r).map(|v| v * r.powf((n as f64 - 1.0) / 2.0) * (r / 2.0).exp());
        out.push(match (w(400.0), w(800.0)) {
            (Ok(a), Ok(b)) => {
                let rel = (b / a - 1.0).abs();
                Check::new(name, rel < 1e-2, format!("relative change {rel:.2e} from 400 to 800"))
            }
            (Err(e), _) | (_, Err(e)) => Check::failed(name, e),
        });
    }
    out
}

/// Audit table `r, gamma0, phi0, closed form, residual` for `N = 3`.
pub fn kernel_csv() -> String {
    let mut out = String::from("r,gamma0,phi0,closed_form,residual\n");
    for r in log_samples(1e-3, 20.0, 201) {
        let g = gamma0(3, r).unwrap_or(f64::NAN);
        let p = phi0(3, r).unwrap_or(f64::NAN);
        let c = (-r).exp() / (4.0 * PI * r);
        let res = gamma0_residual(3, r).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_float(r),
            format_float(g),
            format_float(p),
            format_float(c),
            format_float(res)
        );
    }
    out
}

/// Nodes straddle `r = 1` symmetrically in `ln r`, so an indicator of the
/// unit ball jumps midway between two nodes.
pub fn staggered_grid(ppd: u32) -> RadialGrid {
    build_grid(1e-4 * 10f64.powf(0.5 / ppd as f64), 30.0, ppd).expect("valid grid")
}

fn riesz_ball_error(ppd: u32) -> Result<f64, String> {
    let g = staggered_grid(ppd);
    let op = assemble(OperatorKind::Riesz { alpha: 2.0 }, 3, &g).map_err(|e| e.to_string())?;
    let v = op.apply(&RadialProfile::indicator(&g, 1.0)).map_err(|e| e.to_string())?.values()[0];
    Ok((v / (2.0 * PI) - 1.0).abs())
}

fn green_ball_error(ppd: u32) -> Result<f64, String> {
    let g = staggered_grid(ppd);
    let op = assemble(OperatorKind::Green, 3, &g).map_err(|e| e.to_string())?;
    let v = op.apply(&RadialProfile::indicator(&g, 1.0)).map_err(|e| e.to_string())?.values()[0];
    Ok((v / (1.0 - 2.0 / E) - 1.0).abs())
}

/// Interior relative sup error of `(-Δ + 1) G[e^{-r^2}]` against the bump
/// on `[1e-2, 5]`, with a fourth-order difference stencil.
pub fn green_inverse_error(n: u32, ppd: u32) -> Result<f64, String> {
    let g = build_grid(1e-4, 30.0, ppd).map_err(|e| e.to_string())?;
    let op = assemble(OperatorKind::Green, n, &g).map_err(|e| e.to_string())?;
    let bump = RadialProfile::from_fn(&g, |r| (-r * r).exp(), Some(0.0), TailModel::Zero).map_err(|e| e.to_string())?;
    let u = op.apply(&bump).map_err(|e| e.to_string())?;
    let (start, lu) = radial_operator_fd(n, &g, u.values(), FdOrder::Fourth);
    Ok(g.window(1e-2, 5.0)
        .map(|j| (lu[j - start] - bump.values()[j]).abs())
        .fold(0.0, f64::max)
        / bump.sup_norm())
}

fn refinement_check(name: String, f: impl Fn(u32) -> Result<f64, String>) -> Check {
    match (f(40), f(80)) {
        (Ok(a), Ok(b)) => Check::new(name, a <= 1e-3 && b <= 0.5 * a, format!("{a:.3e} at 40 ppd, {b:.3e} at 80 ppd")),
        (Err(e), _) | (_, Err(e)) => Check::failed(name, e),
    }
}

pub fn operator_checks() -> Vec<Check> {
    let mut out = vec![
        refinement_check("I_2[unit ball indicator] at innermost node is 2 pi (N=3)".into(), riesz_ball_error),
        refinement_check("G[unit ball indicator] at innermost node is 1 - 2/e (N=3)".into(), green_ball_error),
    ];
    for n in [3u32, 4, 5] {
        out.push(refinement_check(
            format!("(-Laplacian + 1) G[gaussian bump] recovers the bump (N={n})"),
            |ppd| green_inverse_error(n, ppd),
        ));
    }
    let g = build_grid(1e-4, 30.0, 20).expect("valid grid");
    for (kind, n) in [
        (OperatorKind::Green, 3u32),
        (OperatorKind::Green, 5),
        (OperatorKind::Riesz { alpha: 2.0 }, 3),
        (OperatorKind::Riesz { alpha: 0.5 }, 4),
    ] {
        let name = format!("{kind:?} N={n} weights are nonnegative");
        let res = assemble(kind, n, &g).and_then(|op| {
            let mut min = f64::INFINITY;
            for sigma in [0.0, 1.0, (n - 2) as f64] {
                let w = op.weights(sigma)?;
                min = w.iter().copied().fold(min, f64::min);
                min = op.origin_weights(sigma)?.iter().copied().fold(min, f64::min);
            }
            Ok(min)
        });
        out.push(match res {
            Ok(m) => Check::new(name, m >= 0.0, format!("min weight {m:.3e}")),
            Err(e) => Check::failed(name, e),
        });
    }
    out
}

/// The nine slope checks: Green for `N = 5`, `tau = 3, 2, 1` (power, log,
/// bounded), Riesz `alpha = 2`, `N = 5` on the same taus, and Riesz
/// `alpha = 1`, `N = 3` at `tau = 2, 1, 1/2`.
pub fn rate_checks() -> Vec<Check> {
    let grid = build_grid(1e-5, 30.0, 20).expect("valid grid");
    let mut out = Vec::new();
    let taus = [int(3), int(2), int(1)];
    for tau in &taus {
        match verify_rate_transfer(5, &int(2), tau, &grid) {
            Ok(rt) => {
                for c in [rt.green, rt.riesz] {
                    out.push(slope_check(5, tau, &c));
                }
            }
            Err(e) => out.push(Check::failed(format!("rate transfer N=5 tau={tau}"), e)),
        }
    }
    for tau in [int(2), int(1), rat(1, 2)] {
        match crate::asymptotics::check_transfer(3, Some(&int(1)), &tau, &grid) {
            Ok(c) => out.push(slope_check(3, &tau, &c)),
            Err(e) => out.push(Check::failed(format!("riesz N=3 tau={tau}"), e)),
        }
    }
    // Green first, then Riesz, for stable numbering.
    out.sort_by_key(|c| !c.name.starts_with("green"));
    out
}

fn slope_check(n: u32, tau: &Rational, c: &crate::asymptotics::SlopeCheck) -> Check {
    let op = match c.operator {
        OperatorKind::Green => "green".to_string(),
        OperatorKind::Riesz { alpha } => format!("riesz alpha={alpha}"),
    };
    Check::new(
        format!("{op} N={n} tau={}: {:?} branch", format_rational(tau), crate::asymptotics::Branch::of(&c.predicted)),
        c.pass,
        format!(
            "predicted {:?}, detected {:?}, slope {:.4}, residuals power {:.2e} log {:.2e}, decade change {:.3}",
            c.predicted, c.branch, c.exponent, c.power_residual, c.log_residual, c.decade_change
        ),
    )
}

/// `(N, alpha, p, q)` as written on the command line.
pub type ExponentTuple = (u32, &'static str, &'static str, &'static str);

/// Parameter tuples with their expected triggers, covering every branch of
/// the classification and the three boundary equalities.
pub fn classification_table() -> Vec<(ExponentTuple, Vec<Trigger>)> {
    use Trigger::*;
    vec![
        ((3, "2", "2", "1"), vec![]),
        ((3, "2", "3", "1"), vec![P]),
        ((3, "2", "2", "3"), vec![Sum, Q]),
        ((3, "2", "5/2", "5/2"), vec![Sum]),
        ((4, "3", "2", "1"), vec![P]),
        ((4, "3", "1/2", "2"), vec![Q]),
        ((4, "1", "1", "1"), vec![]),
        ((4, "1", "6/5", "1"), vec![]),
        ((5, "4", "7/4", "1"), vec![P]),
        ((6, "1", "1", "1"), vec![Sum]),
        ((4, "1/2", "0.3", "2"), vec![Sum, Q]),
        ((3, "2", "3", "3"), vec![Sum, P, Q]),
    ]
}

fn exponents(n: u32, alpha: &str, p: &str, q: &str) -> Result<ProblemExponents, String> {
    let r = |s: &str| parse_rational(s).map_err(|e| e.to_string());
    ProblemExponents::new(n, r(alpha)?, r(p)?, r(q)?).map_err(|e| e.to_string())
}

pub fn classification_checks() -> Vec<Check> {
    classification_table()
        .into_iter()
        .map(|((n, a, p, q), want)| {
            let name = format!("classify N={n} alpha={a} p={p} q={q}");
            match exponents(n, a, p, q) {
                Ok(e) => {
                    let rep = classify(&e);
                    let class = if want.is_empty() {
                        CriticalityClass::Subcritical
                    } else {
                        CriticalityClass::Supercritical
                    };
                    Check::new(
                        name,
                        rep.class == class && rep.triggers == want,
                        format!("{:?} {:?}", rep.class, rep.triggers),
                    )
                }
                Err(e) => Check::failed(name, e),
            }
        })
        .collect()
}

pub fn ledger_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let name = "ledger N=4 alpha=1 p=6/5 q=1: t1 = 17/7, T = [-2, -7/5, -19/50, 677/500], n0 = 3";
    match exponents(4, "1", "6/5", "1").and_then(|e| bootstrap_ledger(&e, None).map_err(|e| e.to_string())) {
        Ok(l) => {
            let t_want = [rat(-2, 1), rat(-7, 5), rat(-19, 50), rat(677, 500)];
            out.push(Check::new(
                name,
                l.t1 == Some(rat(17, 7)) && l.t_seq == t_want && l.n0 == Some(3),
                format!(
                    "t1 {:?}, T [{}], n0 {:?}",
                    l.t1.as_ref().map(format_rational),
                    l.t_seq.iter().map(format_rational).collect::<Vec<_>>().join(", "),
                    l.n0
                ),
            ));
            let name = "T_n - T_(n-1) = (17/10)^(n-1) (T_1 - T_0) exactly";
            let d0 = &t_want[1] - &t_want[0];
            let ok = l.t_seq.len() >= 2
                && (1..l.t_seq.len()).all(|i| &l.t_seq[i] - &l.t_seq[i - 1] == powi(&rat(17, 10), i as i64 - 1) * &d0);
            out.push(Check::new(name, ok, format!("{} terms", l.t_seq.len())));
        }
        Err(e) => out.push(Check::failed(name, e)),
    }
    let name = "s-sequence N=3 alpha=2 p=5/2 q=1 s1=11/10 is [11/10, 11/2], past N/2";
    match exponents(3, "2", "5/2", "1").and_then(|e| s_sequence(&e, Some(&rat(11, 10))).map_err(|e| e.to_string())) {
        Ok(s) => out.push(Check::new(
            name,
            s.values == [rat(11, 10), rat(11, 2)] && s.values[1] > rat(3, 2),
            format!(
                "[{}] {:?}",
                s.values.iter().map(format_rational).collect::<Vec<_>>().join(", "),
                s.termination
            ),
        )),
        Err(e) => out.push(Check::failed(name, e)),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_suites_pass() {
        for c in classification_checks().into_iter().chain(ledger_checks()) {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
        assert_eq!(classification_checks().len(), 12);
    }

    #[test]
    fn kernel_suite_passes() {
        for c in kernel_checks() {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn tap_format() {
        let t = tap(&[Check::new("a", true, "x"), Check::new("b", false, "y")]);
        assert_eq!(t, "TAP version 13\n1..2\nok 1 - a # x\nnot ok 2 - b # y\n");
        assert_eq!("rates".parse::<Suite>(), Ok(Suite::Rates));
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn kernel_csv_has_header_and_rows() {
        let csv = kernel_csv();
        assert!(csv.starts_with("r,gamma0,phi0,closed_form,residual\n"));
        assert_eq!(csv.lines().count(), 202);
    }
}

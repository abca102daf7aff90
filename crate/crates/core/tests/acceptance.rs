//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::time::{Duration, Instant};

use choquard::asymptotics::{
    check_lower_bound, default_epsilons, fit_origin, integrability_probe, ladder_correction_exponent,
    tail_weighted_nonincreasing, GrowthClass,
};
use choquard::exponents::{bootstrap_ledger, classify, s_sequence, ProblemExponents, Trigger};
use choquard::kernels::c_n;
use choquard::radial::build_grid;
use choquard::rational::{parse_rational, powi, rat, Rational};
use choquard::solver::{
    barrier, estimate_barrier_constant, estimate_kstar, fixed_point_residual, solve_many, solve_minimal, Operators,
    ProblemInstance, SolveOutcome, Verdict,
};
use choquard::verify::{kernel_checks, operator_checks, rate_checks, Check};

struct Outcome {
    pass: bool,
    detail: String,
}

fn exps(n: u32, alpha: &str, p: &str, q: &str) -> ProblemExponents {
    let r = |s: &str| parse_rational(s).unwrap();
    ProblemExponents::new(n, r(alpha), r(p), r(q)).unwrap()
}

fn from_checks(checks: Vec<Check>) -> Outcome {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks", checks.len())
        } else {
            format!("failed: {}", failed.join("; "))
        },
    }
}

/// `(num, den)` with `den > 0`.
type Frac = (i128, i128);

fn ge(a: Frac, b: Frac) -> bool {
    a.0 * b.1 >= b.0 * a.1
}

fn add(a: Frac, b: Frac) -> Frac {
    (a.0 * b.1 + b.0 * a.1, a.1 * b.1)
}

/// Triggers by cross-multiplied integer comparisons.
fn oracle_triggers(n: i128, alpha: Frac, p: Frac, q: Frac) -> Vec<Trigger> {
    let mut t = Vec::new();
    if ge(add(p, q), (n * alpha.1 + alpha.0, (n - 2) * alpha.1)) {
        t.push(Trigger::Sum);
    }
    if ge(p, (n, n - 2)) {
        t.push(Trigger::P);
    }
    if ge(q, (n, n - 2)) {
        t.push(Trigger::Q);
    }
    t
}

fn criterion_1() -> Outcome {
    let table: [(i128, Frac, Frac, Frac); 12] = [
        (3, (2, 1), (2, 1), (1, 1)),
        (3, (2, 1), (3, 1), (1, 1)),
        (3, (2, 1), (2, 1), (3, 1)),
        (3, (2, 1), (5, 2), (5, 2)),
        (4, (3, 1), (2, 1), (1, 1)),
        (4, (3, 1), (1, 2), (2, 1)),
        (4, (1, 1), (1, 1), (1, 1)),
        (4, (1, 1), (6, 5), (1, 1)),
        (5, (4, 1), (7, 4), (1, 1)),
        (6, (1, 1), (1, 1), (1, 1)),
        (4, (1, 2), (3, 10), (2, 1)),
        (3, (2, 1), (3, 1), (3, 1)),
    ];
    let mut errors = Vec::new();
    let mut boundaries = 0;
    for (n, a, p, q) in table {
        let s = |f: Frac| format!("{}/{}", f.0, f.1);
        let e = exps(n as u32, &s(a), &s(p), &s(q));
        let want = oracle_triggers(n, a, p, q);
        let got = classify(&e);
        if got.triggers != want || got.is_subcritical() != want.is_empty() {
            errors.push(format!("N={n} {a:?} {p:?} {q:?}: {:?} vs {want:?}", got.triggers));
        }
        let sum = add(p, q);
        if sum.0 * (n - 2) * a.1 == (n * a.1 + a.0) * sum.1 || p.0 * (n - 2) == n * p.1 || q.0 * (n - 2) == n * q.1 {
            boundaries += 1;
        }
    }
    Outcome {
        pass: errors.is_empty() && boundaries >= 3,
        detail: if errors.is_empty() {
            format!("12 tuples, {boundaries} on a boundary, zero errors")
        } else {
            errors.join("; ")
        },
    }
}

fn criterion_2() -> Outcome {
    let l = bootstrap_ledger(&exps(4, "1", "6/5", "1"), None).unwrap();
    let t_want = vec![rat(-2, 1), rat(-7, 5), rat(-19, 50), rat(677, 500)];
    let law = (1..l.t_seq.len())
        .all(|n| &l.t_seq[n] - &l.t_seq[n - 1] == powi(&rat(17, 10), n as i64 - 1) * (&t_want[1] - &t_want[0]));
    let s = s_sequence(&exps(3, "2", "5/2", "1"), Some(&rat(11, 10))).unwrap();
    let half: Rational = rat(3, 2);
    let s_ok = s.values == vec![rat(11, 10), rat(11, 2)] && s.values[1] > half;
    let pass = l.t1 == Some(rat(17, 7)) && l.t_seq == t_want && l.n0 == Some(3) && law && s_ok;
    Outcome {
        pass,
        detail: format!(
            "t1 {:?}, T {:?}, n0 {:?}, difference law {law}, s {:?}",
            l.t1.map(|r| r.to_string()),
            l.t_seq.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            l.n0,
            s.values.iter().map(|r| r.to_string()).collect::<Vec<_>>()
        ),
    }
}

fn criterion_6() -> Outcome {
    let e = exps(3, "2", "2", "1");
    let mut notes = Vec::new();
    let mut pass = true;
    let mut k = 0.0;
    let mut devs = Vec::new();
    for ppd in [40u32, 80] {
        let grid = build_grid(1e-4, 30.0, ppd).unwrap();
        let ops = Operators::assemble(&e, &grid).unwrap();
        let bc = estimate_barrier_constant(&e, &ops).unwrap();
        if ppd == 40 {
            k = 0.5 * bc.khat_q;
        }
        let inst = ProblemInstance::new(e.clone(), k);
        let wall = barrier(&inst, &ops, bc.t_q).unwrap();
        let out = solve_minimal(&inst, &ops, Some(&wall)).unwrap();
        let SolveOutcome::Converged { profile, iterations, trace } = &out else {
            return Outcome {
                pass: false,
                detail: format!("{ppd} ppd: verdict {:?}", out.verdict()),
            };
        };
        let fit = fit_origin(profile, 3, ladder_correction_exponent(&e)).unwrap();
        let dev = (fit.limit_estimate / (c_n(3) * k) - 1.0).abs();
        devs.push(dev);
        if ppd == 40 {
            let mono = trace.max_monotonicity_violation();
            let margin = trace.min_barrier_margin().unwrap_or(f64::NEG_INFINITY);
            let lb = check_lower_bound(profile, k, 3).unwrap();
            let tail = tail_weighted_nonincreasing(profile, 0.3);
            let resid = fixed_point_residual(profile, &inst, &ops).unwrap();
            pass &= *iterations <= 200
                && mono <= 1e-8
                && margin >= -1e-8
                && lb <= 1e-8
                && tail
                && resid <= 2.0 * inst.conv_tol
                && dev <= 0.05;
            notes.push(format!(
                "k {k:.6} = 0.5 khat_q, {iterations} iterations, monotonicity {mono:.1e}, barrier margin {margin:.1e}, lower bound {lb:.1e}, tail e^0.3r nonincreasing {tail}, residual {resid:.1e}"
            ));
        }
    }
    let shrinking = devs[1] < devs[0];
    pass &= shrinking;
    notes.push(format!("origin limit deviation {:.3e} -> {:.3e} (40 -> 80 ppd)", devs[0], devs[1]));
    Outcome {
        pass,
        detail: notes.join("; "),
    }
}

fn criterion_7() -> Outcome {
    let log = integrability_probe(&exps(3, "2", "2", "3"), &default_epsilons()).unwrap();
    let inner = integrability_probe(&exps(3, "2", "3", "1"), &default_epsilons()).unwrap();
    let mut gates = Vec::new();
    let dir = std::env::temp_dir().join(format!("choquard-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for (p, q) in [("2", "3"), ("3", "1")] {
        let cfg = dir.join(format!("gate_{p}_{q}.json"));
        let report = dir.join(format!("gate_{p}_{q}.report.json"));
        std::fs::write(
            &cfg,
            serde_json::json!({
                "exponents": {"N": 3, "alpha": "2", "p": p, "q": q},
                "k": 0.1,
                "outputs": {"report_json": report},
            })
            .to_string(),
        )
        .unwrap();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = choquard::cli::run(["choquard", "solve", "--config", cfg.to_str().unwrap()], &mut out, &mut err);
        gates.push((code, report.exists()));
    }
    let _ = std::fs::remove_dir_all(&dir);
    let pass = log.growth_class == GrowthClass::LogDivergent
        && inner.growth_class == GrowthClass::InnerDivergent
        && gates.iter().all(|&(c, wrote)| c == 3 && !wrote);
    Outcome {
        pass,
        detail: format!(
            "(3,2,2,3) {:?} with increment rate {:?}; (3,2,3,1) {:?}; solve exit codes {:?}",
            log.growth_class,
            log.increment_rate,
            inner.growth_class,
            gates.iter().map(|g| g.0).collect::<Vec<_>>()
        ),
    }
}

fn criterion_8() -> Outcome {
    let e = exps(3, "2", "2", "1");
    let grid = build_grid(1e-4, 30.0, 40).unwrap();
    let ops = Operators::assemble(&e, &grid).unwrap();
    let bc = estimate_barrier_constant(&e, &ops).unwrap();
    let khat = bc.khat_q;
    let template = ProblemInstance::new(e, khat);
    let bracket = match estimate_kstar(&template, &ops, 0.5 * khat, 50.0 * khat, 12) {
        Ok(b) => b,
        Err(err) => {
            return Outcome {
                pass: false,
                detail: err.to_string(),
            }
        }
    };
    let below: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99].iter().map(|f| f * bracket.k_conv).collect();
    let closure_runs = solve_many(&template, &ops, &below).unwrap();
    let sampled_ok = bracket
        .samples
        .iter()
        .filter(|s| s.k <= bracket.k_conv)
        .all(|s| s.verdict == Verdict::Converged);
    let closed = sampled_ok && closure_runs.iter().all(|o| o.verdict() == Verdict::Converged);

    let ks = [0.25 * bracket.k_conv, 0.5 * bracket.k_conv, 0.9 * bracket.k_conv];
    let runs = solve_many(&template, &ops, &ks).unwrap();
    let profiles: Vec<_> = runs.iter().filter_map(|o| o.profile()).collect();
    let mut worst = 0.0f64;
    for w in profiles.windows(2) {
        let sup = w[1].sup_norm();
        for (a, b) in w[0].values().iter().zip(w[1].values()) {
            worst = worst.max((a - b) / sup);
        }
    }
    let ordered = profiles.len() == 3 && worst <= 1e-8;
    let pass = bracket.k_conv >= 0.9 * khat && bracket.k_div.is_finite() && closed && ordered;
    Outcome {
        pass,
        detail: format!(
            "bracket [{:.5}, {:.5}], k_conv/khat_q {:.3}, {} samples, downward closed {closed}, k-monotone (worst {worst:.1e}) {ordered}",
            bracket.k_conv,
            bracket.k_div,
            bracket.k_conv / khat,
            bracket.samples.len()
        ),
    }
}

fn main() {
    type Runner = fn() -> Outcome;
    let criteria: [(u32, &str, Duration, Runner); 8] = [
        (1, "exact classification", Duration::from_secs(1), criterion_1),
        (2, "exact bootstrap ledgers", Duration::from_secs(1), criterion_2),
        (3, "kernel accuracy", Duration::from_secs(10), || from_checks(kernel_checks())),
        (4, "operator oracles", Duration::from_secs(60), || from_checks(operator_checks())),
        (5, "rate-transfer branch table", Duration::from_secs(60), || from_checks(rate_checks())),
        (6, "end-to-end solve", Duration::from_secs(300), criterion_6),
        (7, "nonexistence probes", Duration::from_secs(60), criterion_7),
        (8, "k* bracketing", Duration::from_secs(900), criterion_8),
    ];
    let mut failures = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= budget;
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {id} ({name}): {} [{:.2}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}

//! Command-line front end. [`run`] takes the argument list and output
//! streams so the whole contract (outputs and exit codes) is testable in
//! process.
//!
//! Exit codes: 0 ok, 1 failed verification, 2 invalid input, 3
//! supercritical exponents, 4 diverged, 5 undetermined.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{check_writable, describe_triggers, ConfigError, RunConfig};
use crate::exponents::{bootstrap_ledger, classify, BootstrapLedger, CriticalityReport, ProblemExponents};
use crate::radial::io::{read_profile, write_profile};
use crate::rational::parse_rational;
use crate::report::{analyze_profile, plot_csv, to_json, SolveReport, TraceJson};
use crate::solver::{
    barrier, estimate_barrier_constant, estimate_kstar, fixed_point_residual, solve_minimal, BarrierConstant,
    KSample, Operators, SolveOutcome, Verdict,
};
use crate::verify::{kernel_csv, run_suite, tap, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SUPERCRITICAL: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_UNDETERMINED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "choquard", version, about = "Radial numerical lab for the Choquard equation with a point source")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify exponents as subcritical or supercritical.
    Classify(ExponentArgs),
    /// Print the exact regularity bootstrap ledger.
    Bootstrap {
        #[command(flatten)]
        exponents: ExponentArgs,
        /// Starting index of the integrability ladder.
        #[arg(long)]
        s1: Option<String>,
    },
    /// Compute the minimal solution for the configured k.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Bracket the largest k with a minimal solution.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to half the barrier threshold.
        #[arg(long)]
        k_lo: Option<f64>,
        /// Defaults to 50 times the barrier threshold.
        #[arg(long)]
        k_hi: Option<f64>,
        #[arg(long, default_value_t = 12)]
        steps: usize,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a self-check suite: kernels, operators, rates or bootstrap.
    Verify {
        suite: String,
        /// kernels only: write the audit table here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Analyze a stored profile.
    Report {
        /// Profile CSV with its annotation sidecar.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long = "N")]
        n: u32,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
        /// Write the plot-ready CSV here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ExponentArgs {
    #[arg(long = "N")]
    n: u32,
    #[arg(long)]
    alpha: String,
    #[arg(long)]
    p: String,
    #[arg(long)]
    q: String,
}

impl ExponentArgs {
    fn parse(&self) -> Result<ProblemExponents, String> {
        parse_exponents(self.n, &self.alpha, &self.p, &self.q)
    }
}

fn parse_exponents(n: u32, alpha: &str, p: &str, q: &str) -> Result<ProblemExponents, String> {
    let r = |name: &str, s: &str| parse_rational(s).map_err(|e| format!("{name}: {e}"));
    ProblemExponents::new(n, r("alpha", alpha)?, r("p", p)?, r("q", q)?).map_err(|e| e.to_string())
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INVALID
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Classify(a) => cmd_classify(&a, out),
        Command::Bootstrap { exponents, s1 } => cmd_bootstrap(&exponents, s1.as_deref(), out),
        Command::Solve { config } => cmd_solve(&config, out),
        Command::SweepK {
            config,
            k_lo,
            k_hi,
            steps,
            workers,
        } => cmd_sweep_k(&config, k_lo, k_hi, steps, workers, out),
        Command::Verify { suite, csv } => cmd_verify(&suite, csv.as_deref(), out, err),
        Command::Report {
            profile,
            n,
            k,
            alpha,
            p,
            q,
            plot,
        } => cmd_report(&profile, n, k, [alpha, p, q], plot.as_deref(), out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<(), Failure> {
    out.write_all(to_json(v).as_bytes())
        .map_err(|e| Failure::invalid(format!("cannot write output: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct ClassifyOutput {
    #[serde(flatten)]
    report: CriticalityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    ledger: Option<BootstrapLedger>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ledger_error: Option<String>,
}

fn cmd_classify(a: &ExponentArgs, out: &mut dyn Write) -> CmdResult {
    let e = a.parse().map_err(Failure::invalid)?;
    let report = classify(&e);
    let (ledger, ledger_error) = if report.is_subcritical() {
        match bootstrap_ledger(&e, None) {
            Ok(l) => (Some(l), None),
            Err(err) => (None, Some(err.to_string())),
        }
    } else {
        (None, None)
    };
    emit(
        out,
        &ClassifyOutput {
            report,
            ledger,
            ledger_error,
        },
    )?;
    Ok(EXIT_OK)
}

fn cmd_bootstrap(a: &ExponentArgs, s1: Option<&str>, out: &mut dyn Write) -> CmdResult {
    let e = a.parse().map_err(Failure::invalid)?;
    let report = classify(&e);
    if !report.is_subcritical() {
        return Err(Failure {
            code: EXIT_SUPERCRITICAL,
            message: format!("exponents are supercritical: {}", describe_triggers(&report)),
        });
    }
    let s1 = s1
        .map(|s| parse_rational(s).map_err(|e| Failure::invalid(format!("s1: {e}"))))
        .transpose()?;
    let ledger = bootstrap_ledger(&e, s1.as_ref()).map_err(|e| Failure::invalid(e.to_string()))?;
    emit(out, &ledger)?;
    Ok(EXIT_OK)
}

fn solver_failure(e: impl std::fmt::Display) -> Failure {
    Failure::invalid(format!("solver: {e}"))
}

fn cmd_solve(config: &Path, out: &mut dyn Write) -> CmdResult {
    let cfg = RunConfig::load(config)?;
    let run = cfg.validate(true)?;
    let ops = Operators::assemble(&run.exponents, &run.grid).map_err(solver_failure)?;
    let constant = estimate_barrier_constant(&run.exponents, &ops).ok();
    let wall = match constant {
        Some(b) if run.instance.k <= b.khat_q => Some(barrier(&run.instance, &ops, b.t_q).map_err(solver_failure)?),
        _ => None,
    };
    let outcome = solve_minimal(&run.instance, &ops, wall.as_ref()).map_err(solver_failure)?;
    let residual = match outcome.profile() {
        Some(u) => Some(fixed_point_residual(u, &run.instance, &ops).map_err(solver_failure)?),
        None => None,
    };
    let report = SolveReport::new(&run.exponents, run.instance.k, &run.grid, &outcome, constant, residual);
    let outputs = &cfg.outputs;
    if let Some(path) = &outputs.report_json {
        write_file(path, &to_json(&report))?;
    }
    if let Some(path) = &outputs.trace_json {
        write_file(path, &to_json(&TraceJson::new(outcome.verdict(), outcome.trace())))?;
    }
    if let (Some(path), SolveOutcome::Converged { profile, .. }) = (&outputs.profile_csv, &outcome) {
        write_profile(profile, path).map_err(|e| Failure::invalid(e.to_string()))?;
    }
    emit(out, &report)?;
    Ok(match outcome.verdict() {
        Verdict::Converged => EXIT_OK,
        Verdict::Diverged => EXIT_DIVERGED,
        Verdict::Undetermined => EXIT_UNDETERMINED,
    })
}

#[derive(Serialize)]
struct SweepOutput {
    k_conv: f64,
    k_div: f64,
    khat_q: Option<f64>,
    chat: Option<f64>,
    k_lo: f64,
    k_hi: f64,
    steps: usize,
    samples: Vec<KSample>,
}

fn cmd_sweep_k(
    config: &Path,
    k_lo: Option<f64>,
    k_hi: Option<f64>,
    steps: usize,
    workers: Option<usize>,
    out: &mut dyn Write,
) -> CmdResult {
    let cfg = RunConfig::load(config)?;
    let run = cfg.validate(false)?;
    if workers == Some(0) {
        return Err(Failure::invalid("--workers must be at least 1"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Failure::invalid(e.to_string()))?;
    let sweep = pool.install(|| -> Result<SweepOutput, Failure> {
        let ops = Operators::assemble(&run.exponents, &run.grid).map_err(solver_failure)?;
        let constant: Option<BarrierConstant> = match (k_lo, k_hi) {
            (Some(_), Some(_)) => estimate_barrier_constant(&run.exponents, &ops).ok(),
            _ => Some(estimate_barrier_constant(&run.exponents, &ops).map_err(solver_failure)?),
        };
        let lo = k_lo.unwrap_or_else(|| 0.5 * constant.unwrap().khat_q);
        let hi = k_hi.unwrap_or_else(|| 50.0 * constant.unwrap().khat_q);
        let bracket = estimate_kstar(&run.instance, &ops, lo, hi, steps).map_err(|e| Failure::invalid(e.to_string()))?;
        Ok(SweepOutput {
            k_conv: bracket.k_conv,
            k_div: bracket.k_div,
            khat_q: constant.map(|b| b.khat_q),
            chat: constant.map(|b| b.c_hat),
            k_lo: lo,
            k_hi: hi,
            steps,
            samples: bracket.samples,
        })
    })?;
    emit(out, &sweep)?;
    Ok(EXIT_OK)
}

fn cmd_verify(suite: &str, csv: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let suite: Suite = suite.parse().map_err(Failure::invalid)?;
    if let Some(path) = csv {
        if suite != Suite::Kernels {
            return Err(Failure::invalid("--csv is only available for the kernels suite"));
        }
        check_writable(path)?;
    }
    let checks = run_suite(suite);
    if let Some(path) = csv {
        write_file(path, &kernel_csv())?;
    }
    out.write_all(tap(&checks).as_bytes())
        .map_err(|e| Failure::invalid(format!("cannot write output: {e}")))?;
    match checks.iter().position(|c| !c.pass) {
        Some(i) => {
            let _ = writeln!(err, "first failing check {}: {}", i + 1, checks[i].name);
            Ok(EXIT_CHECK_FAILED)
        }
        None => Ok(EXIT_OK),
    }
}

fn cmd_report(
    profile: &Path,
    n: u32,
    k: f64,
    exps: [Option<String>; 3],
    plot: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Failure::invalid(format!("k must be positive (got {k})")));
    }
    let e = match exps {
        [Some(a), Some(p), Some(q)] => Some(parse_exponents(n, &a, &p, &q).map_err(Failure::invalid)?),
        [None, None, None] => None,
        _ => return Err(Failure::invalid("give all of --alpha, --p, --q or none")),
    };
    if !(3..=64).contains(&n) {
        return Err(Failure::invalid(format!("N must lie in [3, 64] (got {n})")));
    }
    if let Some(path) = plot {
        check_writable(path)?;
    }
    let u = read_profile(profile).map_err(|e| Failure::invalid(e.to_string()))?;
    let rep = analyze_profile(&u, n, k, e.as_ref());
    if let Some(path) = plot {
        write_file(path, &plot_csv(&u, n, k))?;
    }
    emit(out, &rep)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("choquard").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn classify_contract() {
        let (code, out, _) = call(&["classify", "--N", "3", "--alpha", "2", "--p", "2", "--q", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["class"], "subcritical");
        assert!(v["ledger"].is_object());
        let (code, _, err) = call(&["classify", "--N", "3", "--alpha", "4", "--p", "1", "--q", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("alpha must lie in (0, N)"), "{err}");
        let (code, out, _) = call(&["classify", "--N", "3", "--alpha", "2", "--p", "3", "--q", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["class"], "supercritical");
        assert_eq!(v["triggers"], serde_json::json!(["p"]));
    }

    #[test]
    fn usage_errors_and_help() {
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["classify", "--N", "3"]).0, 2);
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("sweep-k"));
        assert_eq!(call(&["verify", "nope"]).0, 2);
        assert_eq!(call(&["verify", "rates", "--csv", "x.csv"]).0, 2);
    }

    #[test]
    fn bootstrap_ledger_output() {
        let (code, out, _) = call(&["bootstrap", "--N", "4", "--alpha", "1", "--p", "6/5", "--q", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["t1"], "17/7");
        assert_eq!(v["T_seq"], serde_json::json!(["-2/1", "-7/5", "-19/50", "677/500"]));
        let (code, _, err) = call(&["bootstrap", "--N", "3", "--alpha", "2", "--p", "3", "--q", "1"]);
        assert_eq!(code, 3);
        assert!(err.contains("p >= N/(N-2)"));
    }
}

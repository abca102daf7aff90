use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn choquard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choquard")).args(args).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write_config(dir: &Path, name: &str, p: &str, q: &str, k: Option<f64>, outputs: bool) -> String {
    let mut cfg = json!({
        "exponents": {"N": 3, "alpha": "2", "p": p, "q": q},
        "grid": {"r_min": 1e-4, "r_max": 30.0, "points_per_decade": 20},
    });
    if let Some(k) = k {
        cfg["k"] = json!(k);
    }
    if outputs {
        cfg["outputs"] = json!({
            "profile_csv": dir.join(format!("{name}.csv")),
            "report_json": dir.join(format!("{name}.report.json")),
            "trace_json": dir.join(format!("{name}.trace.json")),
        });
    }
    let path = dir.join(format!("{name}.config.json"));
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn classify_examples() {
    let o = choquard(&["classify", "--N", "3", "--alpha", "2", "--p", "2", "--q", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["class"], "subcritical");
    assert_eq!(v["thresholds"]["sum"], "5/1");

    let o = choquard(&["classify", "--N", "3", "--alpha", "4", "--p", "1", "--q", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha must lie in (0, N)"));
    assert!(o.stdout.is_empty());

    let o = choquard(&["classify", "--N", "3", "--alpha", "2", "--p", "3", "--q", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["class"], "supercritical");
    assert_eq!(v["triggers"], json!(["p"]));

    // decimals are exact: 2.5 + 2.5 sits on the sum threshold
    let o = choquard(&["classify", "--N", "3", "--alpha", "2", "--p", "2.5", "--q", "2.5"]);
    assert_eq!(stdout_json(&o)["triggers"], json!(["sum"]));
}

#[test]
fn bootstrap_command() {
    let o = choquard(&["bootstrap", "--N", "3", "--alpha", "2", "--p", "5/2", "--q", "1", "--s1", "11/10"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["s_seq"], json!(["11/10", "11/2"]));
    assert_eq!(v["case"], "p_above_alpha_critical");
}

#[test]
fn solve_converges_writes_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a", "2", "1", Some(0.5), true);
    let solved = choquard(&["solve", "--config", &cfg]);
    let o = &solved;
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.report.json")).unwrap()).unwrap();
    assert_eq!(report, stdout_json(o));
    assert_eq!(report["verdict"], "converged");
    assert!(report["singularity"]["rel_err"].as_f64().unwrap() <= 0.05);
    assert!(report["lower_bound_violation"].as_f64().unwrap() <= 1e-8);
    assert_eq!(report["barrier_admissible"], true);
    assert!(report["min_barrier_margin"].as_f64().unwrap() >= -1e-8);
    assert_eq!(report["probes"][0]["growth_class"]["kind"], "convergent");

    let trace: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.trace.json")).unwrap()).unwrap();
    let iters = trace["iterations"].as_u64().unwrap() as usize;
    assert_eq!(trace["sup_norm"].as_array().unwrap().len(), iters);
    assert_eq!(report["iterations"].as_u64().unwrap() as usize, iters);
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(csv.starts_with("r,value\n"));
    assert!(dir.path().join("a.annotations.json").exists());

    let plot = dir.path().join("plot.csv");
    let o = choquard(&[
        "report",
        "--profile",
        dir.path().join("a.csv").to_str().unwrap(),
        "--N",
        "3",
        "--k",
        "0.5",
        "--plot",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout_json(&o)["singularity"]["rel_err"].as_f64().unwrap() <= 0.05);
    assert!(std::fs::read_to_string(&plot).unwrap().starts_with("r,u,"));

    // a second run into other files gives identical bytes
    let cfg_b = write_config(dir.path(), "b", "2", "1", Some(0.5), true);
    let o2 = choquard(&["solve", "--config", &cfg_b]);
    assert_eq!(o2.stdout, solved.stdout);
    for ext in ["csv", "trace.json", "report.json"] {
        let a = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert!(a == b, "{ext} differs between identical runs");
    }
}

#[test]
fn divergence_and_gates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "big", "2", "1", Some(100.0), true);
    let o = choquard(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("big.report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "diverged");
    assert!(dir.path().join("big.trace.json").exists());
    assert!(!dir.path().join("big.csv").exists());

    for (p, q, trigger) in [("3", "1", "p >= N/(N-2)"), ("2", "3", "p + q >= (N+alpha)/(N-2)")] {
        let cfg = write_config(dir.path(), "sup", p, q, Some(0.5), true);
        let o = choquard(&["solve", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(3));
        assert!(String::from_utf8_lossy(&o.stderr).contains(trigger));
        for ext in ["csv", "trace.json", "report.json"] {
            assert!(!dir.path().join(format!("sup.{ext}")).exists());
        }
    }

    let mut bad: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    bad["grid"]["r_max"] = json!(5.0);
    let bad_path = dir.path().join("bad.config.json");
    std::fs::write(&bad_path, bad.to_string()).unwrap();
    let o = choquard(&["solve", "--config", bad_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("big.csv").exists());

    let o = choquard(&["solve", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn undetermined_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "short", "2", "1", Some(0.5), true);
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["solver"] = json!({"max_iter": 2});
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = choquard(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(5));
    assert_eq!(stdout_json(&o)["verdict"], "undetermined");
    assert!(!dir.path().join("short.csv").exists());
}

#[test]
fn sweep_rejects_all_convergent_bracket_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s", "2", "1", None, false);
    let o = choquard(&["sweep-k", "--config", &cfg, "--k-lo", "0.1", "--k-hi", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("raise k_hi"));

    let args = ["sweep-k", "--config", cfg.as_str(), "--steps", "6", "--workers", "2"];
    let a = choquard(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let v = stdout_json(&a);
    let khat = v["khat_q"].as_f64().unwrap();
    assert!(v["k_conv"].as_f64().unwrap() >= khat);
    assert!(v["k_div"].as_f64().unwrap() > v["k_conv"].as_f64().unwrap());
    assert!(v["chat"].as_f64().unwrap() > 0.0);
    let b = choquard(&["sweep-k", "--config", cfg.as_str(), "--steps", "6", "--workers", "1"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_suites_report_tap() {
    let o = choquard(&["verify", "bootstrap"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("TAP version 13\n1..15\n"));
    assert!(text.contains("ok 13 - ledger N=4 alpha=1 p=6/5 q=1"));
    assert!(!text.contains("not ok"));

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("kernels.csv");
    let o = choquard(&["verify", "kernels", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("e^-r/(4 pi r)"));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("r,gamma0,phi0,closed_form,residual\n"));

    let o = choquard(&["verify", "everything"]);
    assert_eq!(o.status.code(), Some(2));
}

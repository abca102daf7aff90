//! Run configuration shared by the `solve` and `sweep-k` commands, loaded
//! from JSON and validated before any computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{classify, ExponentError, ProblemExponents};
use crate::radial::{build_grid, RadialError, RadialGrid};
use crate::rational::{parse_rational, ParseRationalError};
use crate::solver::{check_grid, ProblemInstance, SolverError, DEFAULT_CONV_TOL, DEFAULT_MAX_ITER};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("{field}: {source}")]
    Rational {
        field: &'static str,
        source: ParseRationalError,
    },
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Grid(#[from] RadialError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("exponents are supercritical: {0}")]
    Supercritical(String),
    #[error("output path {0} is not writable: {1}")]
    Unwritable(PathBuf, String),
    #[error("{0}: {1}")]
    Read(PathBuf, String),
}

impl ConfigError {
    /// Exit code of the command-line contract: 3 for the supercritical gate,
    /// 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Supercritical(_) | ConfigError::Solver(SolverError::Supercritical(_)) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentStrings {
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub alpha: Option<String>,
    pub p: Option<String>,
    pub q: Option<String>,
}

impl ExponentStrings {
    pub fn parse(&self) -> Result<ProblemExponents, ConfigError> {
        let n = self.n.ok_or(ConfigError::Missing("N"))?;
        let field = |v: &Option<String>, name: &'static str| {
            let s = v.as_deref().ok_or(ConfigError::Missing(name))?;
            parse_rational(s).map_err(|source| ConfigError::Rational { field: name, source })
        };
        Ok(ProblemExponents::new(
            n,
            field(&self.alpha, "alpha")?,
            field(&self.p, "p")?,
            field(&self.q, "q")?,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub points_per_decade: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r_min: 1e-4,
            r_max: 30.0,
            points_per_decade: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub conv_tol: f64,
    pub blowup_cap: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            conv_tol: DEFAULT_CONV_TOL,
            blowup_cap: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub profile_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub trace_json: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub exponents: ExponentStrings,
    pub k: Option<f64>,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub outputs: OutputConfig,
}

/// A configuration that passed every check.
#[derive(Debug, Clone)]
pub struct ValidatedRun {
    pub exponents: ProblemExponents,
    pub grid: RadialGrid,
    /// `k` is a placeholder `1` when the configuration has none.
    pub instance: ProblemInstance,
    pub k: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Read(path.to_path_buf(), e.to_string()))
    }

    /// Checks exponents, the supercritical gate, grid, solver settings and
    /// output paths, in that order. Nothing is created on disk.
    pub fn validate(&self, require_k: bool) -> Result<ValidatedRun, ConfigError> {
        let exponents = self.exponents.parse()?;
        let report = classify(&exponents);
        if !report.is_subcritical() {
            return Err(ConfigError::Supercritical(describe_triggers(&report)));
        }
        if require_k && self.k.is_none() {
            return Err(ConfigError::Missing("k"));
        }
        let g = &self.grid;
        let grid = build_grid(g.r_min, g.r_max, g.points_per_decade)?;
        check_grid(&grid)?;
        let instance = ProblemInstance {
            exponents: exponents.clone(),
            k: self.k.unwrap_or(1.0),
            max_iter: self.solver.max_iter,
            conv_tol: self.solver.conv_tol,
            blowup_cap: self.solver.blowup_cap,
        };
        instance.validate()?;
        let o = &self.outputs;
        for path in [&o.profile_csv, &o.report_json, &o.trace_json].into_iter().flatten() {
            check_writable(path)?;
        }
        Ok(ValidatedRun {
            exponents,
            grid,
            instance,
            k: self.k,
        })
    }
}

/// Names each fired threshold together with what it breaks.
pub fn describe_triggers(report: &crate::exponents::CriticalityReport) -> String {
    use crate::exponents::Trigger;
    let t = &report.thresholds;
    report
        .triggers
        .iter()
        .map(|tr| match tr {
            Trigger::Sum => format!(
                "p + q >= (N+alpha)/(N-2) = {} (I_alpha[Gamma_0^p] Gamma_0^q is not locally integrable)",
                t.sum
            ),
            Trigger::P => format!("p >= N/(N-2) = {} (I_alpha[Gamma_0^p] is infinite near the origin)", t.p),
            Trigger::Q => format!("q >= N/(N-2) = {} (Gamma_0^q is not locally integrable)", t.q),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// The parent directory exists and is writable; the path is not a directory.
pub fn check_writable(path: &Path) -> Result<(), ConfigError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    match std::fs::metadata(&parent) {
        Ok(m) if m.is_dir() && !m.permissions().readonly() => {}
        Ok(_) => return Err(ConfigError::Unwritable(path.to_path_buf(), "parent is not a writable directory".into())),
        Err(e) => return Err(ConfigError::Unwritable(path.to_path_buf(), e.to_string())),
    }
    if path.is_dir() {
        return Err(ConfigError::Unwritable(path.to_path_buf(), "is a directory".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig {
            exponents: ExponentStrings {
                n: Some(3),
                alpha: Some("2".into()),
                p: Some("2".into()),
                q: Some("1".into()),
            },
            k: Some(0.5),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_validate() {
        let v = base().validate(true).unwrap();
        assert_eq!(v.grid.len(), 220);
        assert_eq!(v.instance.max_iter, 2000);
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let c = base();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        let partial: RunConfig = serde_json::from_str(r#"{"exponents": {"N": 3, "alpha": "2", "p": "2", "q": "1"}, "k": 0.1}"#).unwrap();
        assert_eq!(partial.grid, GridConfig::default());
    }

    #[test]
    fn error_classes() {
        let mut c = base();
        c.exponents.alpha = Some("4".into());
        assert_eq!(c.validate(true).unwrap_err().exit_code(), 2);
        let mut c = base();
        c.exponents.p = Some("3".into());
        let err = c.validate(true).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("p >= N/(N-2)"));
        let mut c = base();
        c.k = None;
        assert!(matches!(c.validate(true), Err(ConfigError::Missing("k"))));
        let mut c = base();
        c.grid.r_max = 5.0;
        assert_eq!(c.validate(true).unwrap_err().exit_code(), 2);
        let mut c = base();
        c.outputs.report_json = Some("/nonexistent/dir/report.json".into());
        assert!(matches!(c.validate(true), Err(ConfigError::Unwritable(..))));
    }
}

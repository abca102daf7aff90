//! Profile files: a CSV with header `r,value` and one node per line, plus a
//! JSON sidecar holding the annotations and the grid parameters.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_grid, RadialError, RadialProfile, TailModel};

#[derive(Debug, Error)]
pub enum ProfileIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Radial(#[from] RadialError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub points_per_decade: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub origin_exponent: Option<f64>,
    pub tail_model: TailModel,
    pub grid: GridSpec,
}

/// Scientific notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn profile_csv(profile: &RadialProfile) -> String {
    let mut out = String::from("r,value\n");
    for (r, v) in profile.grid().nodes().iter().zip(profile.values()) {
        let _ = writeln!(out, "{},{}", format_float(*r), format_float(*v));
    }
    out
}

/// `dir/name.csv` -> `dir/name.annotations.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("annotations.json")
}

pub fn sidecar(profile: &RadialProfile) -> Sidecar {
    let g = profile.grid();
    Sidecar {
        origin_exponent: profile.origin_exponent(),
        tail_model: profile.tail(),
        grid: GridSpec {
            r_min: g.r_min(),
            r_max: g.requested_r_max(),
            points_per_decade: g.points_per_decade(),
        },
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ProfileIoError + '_ {
    move |source| ProfileIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the CSV and its sidecar.
pub fn write_profile(profile: &RadialProfile, csv: &Path) -> Result<(), ProfileIoError> {
    fs::write(csv, profile_csv(profile)).map_err(io_err(csv))?;
    let side = sidecar_path(csv);
    let json = serde_json::to_string_pretty(&sidecar(profile)).map_err(|source| ProfileIoError::Json {
        path: side.clone(),
        source,
    })?;
    fs::write(&side, json + "\n").map_err(io_err(&side))
}

/// Reads a CSV and its sidecar back into a profile.
pub fn read_profile(csv: &Path) -> Result<RadialProfile, ProfileIoError> {
    let side = sidecar_path(csv);
    let meta: Sidecar = serde_json::from_str(&fs::read_to_string(&side).map_err(io_err(&side))?)
        .map_err(|source| ProfileIoError::Json { path: side, source })?;
    let text = fs::read_to_string(csv).map_err(io_err(csv))?;
    let parse_err = |line: usize, reason: String| ProfileIoError::Parse {
        path: csv.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "r,value")) => {}
        _ => return Err(parse_err(1, "expected header `r,value`".into())),
    }
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (r, v) = line
            .split_once(',')
            .ok_or_else(|| parse_err(i + 1, "expected two columns".into()))?;
        let r: f64 = r.trim().parse().map_err(|e| parse_err(i + 1, format!("{e}")))?;
        let v: f64 = v.trim().parse().map_err(|e| parse_err(i + 1, format!("{e}")))?;
        nodes.push(r);
        values.push(v);
    }
    let grid = build_grid(meta.grid.r_min, meta.grid.r_max, meta.grid.points_per_decade)?;
    if grid.len() != nodes.len()
        || grid
            .nodes()
            .iter()
            .zip(&nodes)
            .any(|(a, b)| ((a - b) / a).abs() > 1e-12)
    {
        return Err(parse_err(0, "nodes do not match the grid in the sidecar".into()));
    }
    Ok(RadialProfile::new(grid, values, meta.origin_exponent, meta.tail_model)?)
}

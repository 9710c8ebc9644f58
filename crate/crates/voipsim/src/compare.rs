//! Merge the metrics of several runs into one file for plotting.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::output::METRICS_HEADER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Long format: every run's rows under one header.
    Overlaid,
    /// One block per run, each on the same time axis.
    Stacked,
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("no runs given")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),
}

/// A finished run read back from its output directory.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub scenario: String,
    pub seed: u64,
    pub bucket_width_s: f64,
    pub run_length_s: f64,
    /// Metrics rows without the header.
    pub rows: Vec<String>,
}

fn read(path: &Path) -> Result<String, CompareError> {
    std::fs::read_to_string(path).map_err(|source| CompareError::Io { path: path.to_path_buf(), source })
}

pub fn load_run(dir: &Path) -> Result<RunData, CompareError> {
    let manifest_path = dir.join("manifest.toml");
    let malformed = |message: String| CompareError::Malformed { path: manifest_path.clone(), message };
    let manifest: toml::Table = read(&manifest_path)?.parse().map_err(|e: toml::de::Error| malformed(e.to_string()))?;
    let scenario_section = manifest
        .get("spec")
        .and_then(|s| s.get("scenario"))
        .ok_or_else(|| malformed(String::from("missing [spec.scenario]")))?;
    let float = |key: &str| {
        scenario_section
            .get(key)
            .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
            .ok_or_else(|| malformed(format!("missing spec.scenario.{key}")))
    };
    let bucket_width_s = float("bucket_width_s")?;
    let run_length_s = float("run_length_s")?;
    let scenario = scenario_section
        .get("name")
        .and_then(|v| v.as_str())
        .ok_or_else(|| malformed(String::from("missing spec.scenario.name")))?
        .to_string();
    let seed = manifest
        .get("seed")
        .and_then(|v| v.as_integer())
        .ok_or_else(|| malformed(String::from("missing seed")))? as u64;

    let csv_path = dir.join("metrics.csv");
    let csv = read(&csv_path)?;
    let mut lines = csv.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(CompareError::Malformed { path: csv_path, message: String::from("unexpected header") });
    }
    Ok(RunData { dir: dir.to_path_buf(), scenario, seed, bucket_width_s, run_length_s, rows: lines.map(String::from).collect() })
}

/// All runs must share bucket width and run length.
pub fn check_compatible(runs: &[RunData]) -> Result<(), CompareError> {
    let first = runs.first().ok_or(CompareError::Empty)?;
    for r in &runs[1..] {
        if r.bucket_width_s != first.bucket_width_s {
            return Err(CompareError::IncompatibleRuns(format!(
                "bucket width {} s in {} vs {} s in {}",
                r.bucket_width_s,
                r.dir.display(),
                first.bucket_width_s,
                first.dir.display()
            )));
        }
        if r.run_length_s != first.run_length_s {
            return Err(CompareError::IncompatibleRuns(format!(
                "run length {} s in {} vs {} s in {}",
                r.run_length_s,
                r.dir.display(),
                first.run_length_s,
                first.dir.display()
            )));
        }
    }
    Ok(())
}

pub fn compare_runs(runs: &[RunData], mode: Mode) -> Result<String, CompareError> {
    check_compatible(runs)?;
    let mut out = String::new();
    match mode {
        Mode::Overlaid => {
            out.push_str(METRICS_HEADER);
            out.push('\n');
            for r in runs {
                for row in &r.rows {
                    out.push_str(row);
                    out.push('\n');
                }
            }
        }
        Mode::Stacked => {
            for (i, r) in runs.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&format!("# scenario={} seed={}\n", r.scenario, r.seed));
                out.push_str(METRICS_HEADER);
                out.push('\n');
                for row in &r.rows {
                    out.push_str(row);
                    out.push('\n');
                }
            }
        }
    }
    Ok(out)
}

pub fn compare_dirs(dirs: &[PathBuf], mode: Mode) -> Result<String, CompareError> {
    let runs = dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>, _>>()?;
    compare_runs(&runs, mode)
}

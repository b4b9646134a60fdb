//! Experiment drivers: configuration, CSV output and pass/fail checks.
//!
//! Each run returns a [`Report`] holding its CSV table and named checks.
//! Exit codes: 0 all checks pass, 2 a check failed, 3 the spectral gate
//! failed, 4 numerical failure, 1 usage or I/O error.

mod config;
mod runs;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::chaos_sim::{ChaosError, SamplePool};
use crate::fbm_paths::FbmError;
use crate::kernels::KernelError;
use crate::ratefit::{RateFit, RateFitError};
use crate::spectral::SpectralError;
use crate::tv_estimator::TvError;

pub use config::{ExperimentConfig, TailSpectrum};
pub use runs::{run_cross_validate, run_norm_rate, run_optimality, run_spectrum, run_tail, run_tv_rate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_GATE_FAILED: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Version string written into every CSV header.
pub const TOOL_VERSION: &str = concat!("chaos-tv ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("spectral gate failed: {0}")]
    Gate(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Chaos(#[from] ChaosError),
    #[error(transparent)]
    Fbm(#[from] FbmError),
    #[error(transparent)]
    Tv(#[from] TvError),
    #[error(transparent)]
    Fit(#[from] RateFitError),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Io(_) => EXIT_USAGE,
            ExperimentError::Gate(_) => EXIT_GATE_FAILED,
            ExperimentError::Kernel(KernelError::InvalidHurst { .. } | KernelError::NotSquareIntegrable { .. }) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        }
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Column-major numeric table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// 17 significant digits; integers stay integers.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: String,
    pub header: Vec<String>,
    pub table: Table,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub fit: Option<RateFit>,
    pub gate_failed: bool,
    /// Pools to dump when requested, with file stems.
    pub samples: Vec<(String, SamplePool)>,
}

impl Report {
    pub(crate) fn new(name: &str, cfg: &ExperimentConfig) -> Self {
        let mut header = vec![format!("experiment = {name}"), format!("tool = {TOOL_VERSION}")];
        header.extend(cfg.describe().lines().map(str::to_string));
        Self {
            name: name.to_string(),
            header,
            table: Table::default(),
            checks: Vec::new(),
            notes: Vec::new(),
            fit: None,
            gate_failed: false,
            samples: Vec::new(),
        }
    }

    pub(crate) fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    pub(crate) fn meta(&mut self, line: String) {
        self.header.push(line);
    }

    pub fn passed(&self) -> bool {
        !self.gate_failed && self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.gate_failed {
            EXIT_GATE_FAILED
        } else if self.passed() {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// CSV text: `#` header block, then a header row and numeric rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for line in &self.header {
            let _ = writeln!(s, "# {line}");
        }
        if let Some(f) = &self.fit {
            let _ = writeln!(
                s,
                "# fit slope = {}, stderr = {}, r_squared = {}",
                format_number(f.slope),
                format_number(f.stderr_slope),
                format_number(f.r_squared)
            );
        }
        let _ = writeln!(s, "{}", self.table.columns.join(","));
        for row in &self.table.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    /// Plot script for the CSV, as log-log when the first column is positive.
    pub fn gnuplot_script(&self, csv_name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set datafile commentschars '#'");
        let _ = writeln!(s, "set key autotitle columnhead");
        let _ = writeln!(s, "set logscale xy");
        let _ = writeln!(s, "set terminal pngcairo size 800,600");
        let _ = writeln!(s, "set output '{}.png'", self.name);
        let _ = writeln!(s, "set xlabel '{}'", self.table.columns.first().map_or("", |c| c.as_str()));
        let plots: Vec<String> = (2..=self.table.columns.len().min(3))
            .map(|k| format!("'{csv_name}' using 1:{k} with linespoints"))
            .collect();
        let _ = writeln!(s, "plot {}", plots.join(", "));
        s
    }

    /// Human-readable summary lines.
    pub fn summary(&self) -> String {
        let mut s = format!("{}: {}\n", self.name, if self.passed() { "PASS" } else { "FAIL" });
        if let Some(f) = &self.fit {
            let _ = writeln!(s, "  slope {:.4} ± {:.4} (r² {:.4})", f.slope, f.stderr_slope, f.r_squared);
        }
        for c in &self.checks {
            let _ = writeln!(s, "  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }

    /// Writes `<name>.csv` (and optional companions) into `dir`.
    pub fn write(&self, dir: &Path, gnuplot: bool, dump_samples: bool) -> Result<Vec<PathBuf>, ExperimentError> {
        fs::create_dir_all(dir)?;
        let csv_name = format!("{}.csv", self.name);
        let csv = dir.join(&csv_name);
        fs::write(&csv, self.to_csv())?;
        let mut written = vec![csv];
        if gnuplot {
            let gp = dir.join(format!("{}.gp", self.name));
            fs::write(&gp, self.gnuplot_script(&csv_name))?;
            written.push(gp);
        }
        if dump_samples {
            for (stem, pool) in &self.samples {
                let path = dir.join(format!("{}_{stem}.csv", self.name));
                let mut buf = Vec::new();
                pool.write_csv(&mut buf)?;
                fs::write(&path, buf)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// Runs a named experiment.
pub fn run_named(name: &str, cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    match name {
        "norm-rate" => run_norm_rate(cfg),
        "tv-rate" => run_tv_rate(cfg),
        "optimality" => run_optimality(cfg),
        "spectrum" => run_spectrum(cfg),
        "tail" => run_tail(cfg),
        "cross-validate" => run_cross_validate(cfg),
        _ => Err(ExperimentError::Config(format!("unknown experiment `{name}`"))),
    }
}

pub const EXPERIMENTS: [&str; 6] = ["norm-rate", "tv-rate", "optimality", "spectrum", "tail", "cross-validate"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 12345.678, 2.0f64.sqrt()] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_number(64.0), "64");
    }

    #[test]
    fn report_exit_codes() {
        let cfg = ExperimentConfig::default();
        let mut r = Report::new("x", &cfg);
        assert_eq!(r.exit_code(), EXIT_OK);
        r.check("a", false, String::new());
        assert_eq!(r.exit_code(), EXIT_CHECK_FAILED);
        r.gate_failed = true;
        assert_eq!(r.exit_code(), EXIT_GATE_FAILED);
        assert_eq!(ExperimentError::Gate(String::new()).exit_code(), EXIT_GATE_FAILED);
        assert_eq!(ExperimentError::Config(String::new()).exit_code(), EXIT_USAGE);
        assert_eq!(
            ExperimentError::Tv(TvError::EmptyPool).exit_code(),
            EXIT_NUMERICAL
        );
    }

    #[test]
    fn csv_layout() {
        let cfg = ExperimentConfig::default();
        let mut r = Report::new("demo", &cfg);
        r.table = Table::new(&["n", "value"]);
        r.table.push(vec![4.0, 0.5]);
        let csv = r.to_csv();
        assert!(csv.starts_with("# experiment = demo\n"));
        assert!(csv.contains("# seed = "));
        assert!(csv.ends_with("n,value\n4,5.0000000000000000e-1\n"));
    }
}

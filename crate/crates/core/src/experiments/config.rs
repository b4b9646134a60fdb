//! Flat `key = value` configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use super::ExperimentError;
use crate::kernels::{HurstPair, QuadratureConfig};
use crate::tv_estimator::{TvMethod, DEFAULT_BINS, DEFAULT_RESAMPLES};

/// Synthetic spectra for the small-ball controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSpectrum {
    /// The limit kernel's own spectrum.
    Kernel,
    /// Five eigenvalues equal to 1/2.
    FiveEqual,
    /// One eigenvalue equal to 1.
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub hurst: HurstPair,
    pub n_grid: Vec<usize>,
    pub sample_count: usize,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
    pub tv_method: TvMethod,
    /// Bin count (histogram) or bandwidth (KDE, `0` for automatic).
    pub bins_or_bandwidth: f64,
    pub output_path: Option<PathBuf>,
    pub resamples: usize,
    /// Mixing-variable cells used for the limit kernel's spectrum.
    pub reference_cells: usize,
    pub c_grid: Vec<f64>,
    /// Empty for an automatic grid from the sample's lower tail.
    pub u_grid: Vec<f64>,
    pub tail_spectrum: TailSpectrum,
    pub tail_cells: usize,
    pub cross_n: usize,
    pub cross_samples: usize,
    pub cross_grid: Vec<usize>,
    /// Overrides each experiment's own exponent tolerance.
    pub tolerance: Option<f64>,
    pub gnuplot: bool,
    pub dump_samples: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hurst: HurstPair::new(0.8, 0.8).expect("valid default"),
            n_grid: vec![4, 8, 16, 32, 64, 128],
            sample_count: 1_000_000,
            seed: 20_240_601,
            quadrature: QuadratureConfig::default(),
            tv_method: TvMethod::Histogram,
            bins_or_bandwidth: DEFAULT_BINS as f64,
            output_path: None,
            resamples: DEFAULT_RESAMPLES,
            reference_cells: 512,
            c_grid: vec![0.05, 0.1, 0.2, 0.4],
            u_grid: Vec::new(),
            tail_spectrum: TailSpectrum::Kernel,
            tail_cells: 64,
            cross_n: 64,
            cross_samples: 100_000,
            cross_grid: vec![1, 4, 16, 64],
            tolerance: None,
            gnuplot: false,
            dump_samples: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ExperimentError> {
    value
        .trim()
        .parse()
        .map_err(|_| ExperimentError::Config(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ExperimentError> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ExperimentError> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ExperimentError::Config(format!("`{key}` expects true or false"))),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = Self::default();
        let mut h = (cfg.hurst.h1(), cfg.hurst.h2());
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            cfg.set_inner(k.trim(), v.trim(), &mut h)
                .map_err(|e| ExperimentError::Config(format!("line {}: {e}", no + 1)))?;
        }
        cfg.hurst = HurstPair::relaxed(h.0, h.1)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one override; the same keys as the file format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        let mut h = (self.hurst.h1(), self.hurst.h2());
        self.set_inner(key, value, &mut h)?;
        self.hurst = HurstPair::relaxed(h.0, h.1)?;
        self.validate()
    }

    fn set_inner(&mut self, key: &str, v: &str, h: &mut (f64, f64)) -> Result<(), ExperimentError> {
        let q = &mut self.quadrature;
        match key.replace('-', "_").as_str() {
            "h1" => h.0 = parse(key, v)?,
            "h2" => h.1 = parse(key, v)?,
            "n_grid" => self.n_grid = parse_list(key, v)?,
            "sample_count" | "samples" => self.sample_count = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "truncation_left" => q.truncation_left = parse(key, v)?,
            "panels_per_unit" => q.panels_per_unit = parse(key, v)?,
            "grading_exponent" => q.grading_exponent = parse(key, v)?,
            "nodes_per_panel" => q.nodes_per_panel = parse(key, v)?,
            "abs_tol" => q.abs_tol = parse(key, v)?,
            "rel_tol" => q.rel_tol = parse(key, v)?,
            "tv_method" => {
                self.tv_method = match v {
                    "histogram" => TvMethod::Histogram,
                    "kde" => TvMethod::Kde,
                    _ => return Err(ExperimentError::Config(format!("unknown tv_method `{v}`"))),
                };
                if self.tv_method == TvMethod::Kde && self.bins_or_bandwidth == DEFAULT_BINS as f64 {
                    self.bins_or_bandwidth = 0.0;
                }
            }
            "bins" | "bandwidth" | "bins_or_bandwidth" => self.bins_or_bandwidth = parse(key, v)?,
            "output" | "out" | "output_path" => self.output_path = Some(PathBuf::from(v)),
            "resamples" => self.resamples = parse(key, v)?,
            "reference_cells" => self.reference_cells = parse(key, v)?,
            "c_grid" => self.c_grid = parse_list(key, v)?,
            "u_grid" => self.u_grid = if v == "auto" { Vec::new() } else { parse_list(key, v)? },
            "tail_spectrum" => {
                self.tail_spectrum = match v {
                    "kernel" => TailSpectrum::Kernel,
                    "five_equal" => TailSpectrum::FiveEqual,
                    "single" => TailSpectrum::Single,
                    _ => return Err(ExperimentError::Config(format!("unknown tail_spectrum `{v}`"))),
                }
            }
            "tail_cells" => self.tail_cells = parse(key, v)?,
            "cross_n" => self.cross_n = parse(key, v)?,
            "cross_samples" => self.cross_samples = parse(key, v)?,
            "cross_grid" => self.cross_grid = parse_list(key, v)?,
            "tolerance" => self.tolerance = if v == "default" { None } else { Some(parse(key, v)?) },
            "gnuplot" => self.gnuplot = parse_bool(key, v)?,
            "dump_samples" => self.dump_samples = parse_bool(key, v)?,
            _ => return Err(ExperimentError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        self.quadrature.validate()?;
        if self.n_grid.len() < 2 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) || self.n_grid[0] == 0 {
            return bad("n_grid must be strictly increasing positive integers with at least 2 entries");
        }
        if self.cross_grid.windows(2).any(|w| w[1] <= w[0]) || self.cross_grid.first() == Some(&0) {
            return bad("cross_grid must be strictly increasing positive integers");
        }
        if self.sample_count == 0 || self.cross_samples == 0 {
            return bad("sample counts must be positive");
        }
        if self.reference_cells == 0 || self.tail_cells == 0 || self.cross_n == 0 {
            return bad("cell counts must be positive");
        }
        if self.resamples < 100 {
            return bad("resamples must be at least 100");
        }
        match self.tv_method {
            TvMethod::Histogram if self.bins_or_bandwidth < 2.0 || self.bins_or_bandwidth.fract() != 0.0 => {
                return bad("bins must be an integer ≥ 2");
            }
            TvMethod::Kde if !(self.bins_or_bandwidth >= 0.0) => return bad("bandwidth must be ≥ 0 (0 = automatic)"),
            _ => {}
        }
        if self.c_grid.iter().any(|&c| !(c > 0.0 && c <= 0.5)) {
            return bad("c_grid values must lie in (0, 0.5]");
        }
        if self.u_grid.iter().any(|&u| !(u > 0.0)) {
            return bad("u_grid values must be positive");
        }
        Ok(())
    }

    /// Every setting as `key = value` lines, for CSV headers.
    pub fn describe(&self) -> String {
        let q = &self.quadrature;
        let mut s = String::new();
        let method = match self.tv_method {
            TvMethod::Histogram => "histogram",
            TvMethod::Kde => "kde",
        };
        let tail = match self.tail_spectrum {
            TailSpectrum::Kernel => "kernel",
            TailSpectrum::FiveEqual => "five_equal",
            TailSpectrum::Single => "single",
        };
        let u_grid = if self.u_grid.is_empty() { "auto".to_string() } else { join(&self.u_grid) };
        let pairs: Vec<(&str, String)> = vec![
            ("h1", self.hurst.h1().to_string()),
            ("h2", self.hurst.h2().to_string()),
            ("n_grid", join(&self.n_grid)),
            ("sample_count", self.sample_count.to_string()),
            ("seed", self.seed.to_string()),
            ("truncation_left", q.truncation_left.to_string()),
            ("panels_per_unit", q.panels_per_unit.to_string()),
            ("grading_exponent", q.grading_exponent.to_string()),
            ("nodes_per_panel", q.nodes_per_panel.to_string()),
            ("abs_tol", q.abs_tol.to_string()),
            ("rel_tol", q.rel_tol.to_string()),
            ("tv_method", method.to_string()),
            ("bins_or_bandwidth", self.bins_or_bandwidth.to_string()),
            ("resamples", self.resamples.to_string()),
            ("reference_cells", self.reference_cells.to_string()),
            ("c_grid", join(&self.c_grid)),
            ("u_grid", u_grid),
            ("tail_spectrum", tail.to_string()),
            ("tail_cells", self.tail_cells.to_string()),
            ("cross_n", self.cross_n.to_string()),
            ("cross_samples", self.cross_samples.to_string()),
            ("cross_grid", join(&self.cross_grid)),
            ("tolerance", self.tolerance.map_or("default".to_string(), |t| t.to_string())),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let cfg = ExperimentConfig::parse(
            "# a comment\nh1 = 0.9\nh2 = 0.8   # trailing\n\nn_grid = 4, 8,16\nsamples = 1000\ntv_method = kde\n",
        )
        .unwrap();
        assert_eq!(cfg.hurst.h1(), 0.9);
        assert_eq!(cfg.n_grid, vec![4, 8, 16]);
        assert_eq!(cfg.sample_count, 1000);
        assert_eq!(cfg.tv_method, TvMethod::Kde);
        assert_eq!(cfg.bins_or_bandwidth, 0.0);
    }

    #[test]
    fn describe_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("c_grid", "0.1,0.3").unwrap();
        cfg.set("u_grid", "1,10").unwrap();
        let back = ExperimentConfig::parse(&cfg.describe()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::parse("n_grid = 8, 4").is_err());
        assert!(ExperimentConfig::parse("n_grid = 8").is_err());
        assert!(ExperimentConfig::parse("h1 = 0.4").is_err());
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("no equals sign").is_err());
        assert!(ExperimentConfig::parse("c_grid = 0.7").is_err());
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("seed", "x").is_err());
        cfg.set("seed", "7").unwrap();
        assert_eq!(cfg.seed, 7);
    }
}

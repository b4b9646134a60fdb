use std::path::PathBuf;
use std::process::ExitCode;

use chaos_tv::experiments::{run_named, ExperimentConfig, ExperimentError, EXIT_USAGE};
use clap::{Parser, Subcommand};

/// Default output directory when neither `--out` nor the config sets one.
const OUT_DIR_ENV: &str = "CHAOS_TV_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "chaos-tv", version, about = "Second-chaos kernel, spectrum and total-variation experiments")]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,

    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Draws per sample pool.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Worker threads; changes speed only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Extra config override, repeatable: `--set key=value`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Also write a gnuplot script next to the CSV.
    #[arg(long, global = true)]
    gnuplot: bool,

    /// Also write the sample pools, one value per row.
    #[arg(long, global = true)]
    dump_samples: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Experiment {
    /// L² distance between the block and limit kernels along n.
    NormRate,
    /// TV between the block and limit chaos laws along n.
    TvRate,
    /// TV between scaled copies of the limit law.
    Optimality,
    /// Spectrum of the limit kernel and the eigenvalue-count check.
    Spectrum,
    /// Small-ball exponent of the Malliavin norm.
    Tail,
    /// Path route against kernel route, and TV to the limit.
    CrossValidate,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::NormRate => "norm-rate",
            Experiment::TvRate => "tv-rate",
            Experiment::Optimality => "optimality",
            Experiment::Spectrum => "spectrum",
            Experiment::Tail => "tail",
            Experiment::CrossValidate => "cross-validate",
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| ExperimentError::Config(format!("`--set {o}` is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = cli.samples {
        cfg.set("sample_count", &samples.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.output_path = Some(out.clone());
    }
    cfg.gnuplot |= cli.gnuplot;
    cfg.dump_samples |= cli.dump_samples;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, ExperimentError> {
    let cfg = load_config(cli)?;
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    }
    let report = run_named(cli.experiment.name(), &cfg)?;
    let dir = cfg
        .output_path
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let written = report.write(&dir, cfg.gnuplot, cfg.dump_samples)?;
    print!("{}", report.summary());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(if code == 0 { EXIT_USAGE as u8 } else { code as u8 })
        }
    }
}

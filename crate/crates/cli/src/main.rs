//! `kacpp <experiment> [--config FILE] [overrides]`
//!
//! Runs one experiment and writes the JSON result to `--out` (stdout if
//! omitted), plus the optional per-trial CSV and SVG plots.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use kacpp::experiment::{self, ExperimentConfig, ExperimentKind, SignConvention};

#[derive(Debug, Parser)]
#[command(name = "kacpp", version, about = "Poisson statistics of Kac polynomial roots near the unit circle")]
struct Cli {
    /// mu-poisson | nu-poisson | mu-nu-compare | covariance | gauss-oracle |
    /// universality | extended-intensity | separation-audit
    experiment: ExperimentKind,
    /// TOML configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coefficient law name (gaussian, rademacher, uniform, discrete).
    #[arg(long)]
    law: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "KACPP_WORKERS")]
    workers: Option<usize>,
    /// JSON result path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory for SVG plots.
    #[arg(long)]
    plots: Option<PathBuf>,
    /// CSV dump of all accepted roots.
    #[arg(long)]
    dump_roots: Option<PathBuf>,
    #[arg(long)]
    sign_convention: Option<SignConvention>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path, cli.experiment)
            .with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::new(cli.experiment),
    };
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(m) = cli.trials {
        cfg.trials = m;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(law) = &cli.law {
        cfg.law = law.clone();
        cfg.law_params.clear();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.sign_convention {
        cfg.sign_convention = s;
    }
    cfg.output = cli.out.clone().or(cfg.output);
    cfg.csv = cli.csv.clone().or(cfg.csv);
    cfg.plots = cli.plots.clone().or(cfg.plots);
    cfg.dump_roots = cli.dump_roots.clone().or(cfg.dump_roots);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match try_main(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    let result = experiment::run(&cfg)?;
    experiment::write_outputs(&result)?;
    if cfg.output.is_none() {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        log::info!("config_hash={} wall_time={:.2}s", result.config_hash, result.wall_time_s);
    }
    Ok(())
}

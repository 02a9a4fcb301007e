//! `frap`: simulate, fit and check long-memory probit models from the shell.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use frap_core::config::RunConfig;
use frap_core::frap::Trend;

#[derive(Parser, Debug)]
#[command(
    name = "frap",
    version,
    about = "Long-memory probit models for binary event series"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// MCMC iterations `L`.
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub burn_in: Option<usize>,
    /// Grid spacing of input panels.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Manifest path; defaults to `<output>.manifest.json`.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Frap,
    Mmpp,
    /// A single continuous fGN path, one value per line.
    Fgn,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a FRAP or MMPP panel, or an fGN series.
    Simulate(SimulateArgs),
    /// Fit the single-species model to a panel.
    Fit(FitArgs),
    /// Fit the membership model to one panel per species and report DIC.
    FitHier(FitHierArgs),
    /// Rescaled-range and DFA statistics of a numeric series.
    Hurst(HurstArgs),
    /// Maximum-likelihood MMPP fit.
    MmppFit(MmppFitArgs),
    /// Posterior trend `f / τ` at test points.
    Predict(PredictArgs),
    /// Scale statistics of data, posterior predictive and optional MMPP.
    Check(CheckArgs),
    /// Effective sample sizes and acceptance rates of a fit.
    Diag(DiagArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "frap")]
    pub model: ModelKind,
    #[arg(long, default_value = "f3")]
    pub trend: Trend,
    #[arg(long = "H", default_value_t = 0.75)]
    pub hurst: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long = "R", default_value_t = 25)]
    pub replicates: usize,
    #[arg(long, default_value_t = 90)]
    pub n: usize,
    /// Two-state MMPP `q12, q21, λ1, λ2`.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.1, 0.1, 0.2, 2.0])]
    pub mmpp: Vec<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitHierArgs {
    /// One panel CSV per species.
    #[arg(short, long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    /// Number of extremal profiles.
    #[arg(long = "K")]
    pub classes: Option<usize>,
    /// Directory for samples, DIC, membership and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct HurstArgs {
    /// Numbers separated by commas or whitespace.
    #[arg(short, long)]
    pub input: PathBuf,
    /// DFA polynomial degree.
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<usize>>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MmppFitArgs {
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Test points in grid time; defaults to a half-step grid.
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// The panel the samples were fitted to.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 9, 15])]
    pub scales: Vec<usize>,
    /// JSON written by `mmpp-fit`; adds a simulated MMPP row set.
    #[arg(long)]
    pub mmpp: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.mcmc.seed = s;
    }
    if let Some(l) = common.iterations {
        cfg.mcmc.iterations = l;
    }
    if common.burn_in.is_some() {
        cfg.mcmc.burn_in = common.burn_in;
    }
    if let Some(d) = common.delta {
        cfg.model.delta = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    let n = match std::env::var("FRAP_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .with_context(|| format!("FRAP_THREADS={v:?}"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let cfg = resolve_config(&cli.common)?;
    let c = &cli.common;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a, &cfg, c),
        Command::Fit(a) => commands::fit(&a, &cfg, c),
        Command::FitHier(a) => commands::fit_hier(&a, &cfg, c),
        Command::Hurst(a) => commands::hurst(&a, &cfg, c),
        Command::MmppFit(a) => commands::mmpp_fit(&a, &cfg, c),
        Command::Predict(a) => commands::predict(&a, &cfg, c),
        Command::Check(a) => commands::check(&a, &cfg, c),
        Command::Diag(a) => commands::diag(&a, &cfg, c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "[mcmc]\niterations = 300\nseed = 4\n").unwrap();
        let mut c = Common {
            config: Some(p),
            ..Common::default()
        };
        let cfg = resolve_config(&c).unwrap();
        assert_eq!((cfg.mcmc.iterations, cfg.mcmc.seed), (300, 4));
        assert_eq!(cfg.mcmc.adapt_interval, 50);
        c.seed = Some(9);
        let cfg = resolve_config(&c).unwrap();
        assert_eq!((cfg.mcmc.iterations, cfg.mcmc.seed), (300, 9));
        assert_eq!(resolve_config(&Common::default()).unwrap(), RunConfig::default());
    }

    #[test]
    fn invalid_override_rejected() {
        let c = Common {
            iterations: Some(10),
            burn_in: Some(20),
            ..Common::default()
        };
        assert!(resolve_config(&c).is_err());
    }
}

//! `mudsim`: experiment driver for blind activity detection.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, CoverageArgs, Run};
use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mudsim", version, about = "Grant-free activity detection experiments")]
struct Cli {
    /// TOML experiment config with [scheme], [channel], [network], [train], [sweep].
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Named scenario: scma-150, scma-300, musa-150, musa-300 (suffix -x2/-x4 for antennas).
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Override a config key, e.g. --set train.epochs=5. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides the config's `output`).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    /// Write zero runtimes so reruns produce byte-identical CSV.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the code set; write it with an N x N correlation CSV.
    GenCodes,
    /// Generate the training and validation datasets.
    GenData,
    /// Train the detector (generating datasets if absent).
    Train,
    /// Evaluate every configured algorithm at sweep.snr.
    Eval,
    /// Evaluate every configured algorithm over sweep.grid.
    Sweep,
    /// Metrics and calibration bins from predictions or a model.
    Analyze {
        /// CSV with `probability` and `label` columns (e.g. from eval).
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Dataset to score with the trained model.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// FLOPs breakdown of the configured detector.
    Flops,
    /// Pair-coverage bound next to a Monte-Carlo estimate.
    Coverage {
        /// Devices N (defaults to scheme.devices).
        #[arg(long)]
        devices: Option<u64>,
        /// Active devices per label set n.
        #[arg(long, default_value_t = 2)]
        active: u64,
        #[arg(long, default_value_t = 50)]
        alpha_max: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// LOS probability and pathloss against distance for an indoor-factory scenario.
    ChannelProbe {
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), cli.preset.as_deref(), &cli.overrides)?;
    if let Some(o) = cli.output {
        cfg.output = o;
    }
    let run = Run::new(cfg, cli.deterministic);
    match cli.command {
        Command::GenCodes => commands::cmd_gen_codes(&run),
        Command::GenData => commands::cmd_gen_data(&run),
        Command::Train => commands::cmd_train(&run),
        Command::Eval => commands::cmd_eval(&run),
        Command::Sweep => commands::cmd_sweep(&run),
        Command::Analyze { predictions, dataset, bins } => {
            commands::cmd_analyze(&run, &AnalyzeArgs { predictions, dataset, bins })
        }
        Command::Flops => commands::cmd_flops(&run),
        Command::Coverage { devices, active, alpha_max, trials, seed } => commands::cmd_coverage(
            &run,
            &CoverageArgs { devices, active, alpha_max, trials, seed },
        ),
        Command::ChannelProbe { points } => commands::cmd_channel_probe(&run, points),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

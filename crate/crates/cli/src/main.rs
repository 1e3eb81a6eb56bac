mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, CliResult};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "hierda", version, about = "Hierarchical Bayesian data assimilation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the truth and write synthetic observations.
    Generate(Common),
    /// Run the sampler chains on generated data.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue each chain from its last checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Export traces, autocorrelations, summaries and field statistics.
    Diagnose(Common),
    /// Propagate posterior samples forward and write trajectory bands.
    Forecast(Common),
    /// Print move and solver counts per chain.
    Report(Common),
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(c: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            config::parse(&text).map_err(CliError::Config)?
        }
        (None, Some(name)) => config::preset(name).map_err(CliError::Config)?,
        (None, None) => return Err(CliError::Config("pass --config <file> or --preset <name>".into())),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate(c) => commands::generate(&load(&c)?),
        Command::Run { common, resume } => commands::run(&load(&common)?, resume),
        Command::Diagnose(c) => commands::diagnose(&load(&c)?),
        Command::Forecast(c) => commands::forecast_cmd(&load(&c)?),
        Command::Report(c) => commands::report(&load(&c)?),
        Command::Presets => {
            for p in config::preset_names() {
                println!("{p}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

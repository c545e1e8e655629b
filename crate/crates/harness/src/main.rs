use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvsense::sim::ScenarioConfig;
use cvsense_harness::artifact::{write_artifacts, Artifact};
use cvsense_harness::commands::{self, config_text, parse_config, CommandError};
use cvsense_harness::report::ReportConfig;
use cvsense_harness::sweep::SweepGrid;

#[derive(Parser)]
#[command(name = "cvsense", version, about = "Compressive sensing for connected-vehicle data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults apply to anything it leaves out.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides the config's seed (ignored by `report`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Compress the speed series of BSM trips into stream files.
    Compress(Common),
    /// Recover stream files.
    Recover(Common),
    /// RMSE by block length and compression ratio, plus binned reports.
    Bench(Common),
    /// Run one corridor scenario.
    Simulate(Common),
    /// Run a scenario grid.
    Sweep(Common),
    /// Charts from simulate or sweep outputs.
    Report(Common),
}

fn read_config(path: Option<&Path>) -> Result<Option<String>, CommandError> {
    path.map(|p| std::fs::read_to_string(p).map_err(|e| CommandError::Io { path: p.display().to_string(), msg: e.to_string() }))
        .transpose()
}

fn execute(cmd: Command) -> Result<(PathBuf, Vec<Artifact>, String), CommandError> {
    let (common, name) = match &cmd {
        Command::Compress(c) => (c, "compress"),
        Command::Recover(c) => (c, "recover"),
        Command::Bench(c) => (c, "bench"),
        Command::Simulate(c) => (c, "simulate"),
        Command::Sweep(c) => (c, "sweep"),
        Command::Report(c) => (c, "report"),
    };
    let text = read_config(common.config.as_deref())?;
    let text = text.as_deref();
    let seed = common.seed;
    let (artifacts, cfg) = match name {
        "compress" => {
            let mut cfg: commands::CompressConfig = parse_config(text)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            (commands::compress(&cfg)?, config_text(&cfg))
        }
        "recover" => {
            let cfg: commands::RecoverConfig = parse_config(text)?;
            (commands::recover(&cfg)?, config_text(&cfg))
        }
        "bench" => {
            let mut cfg: commands::BenchCommandConfig = parse_config(text)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            (commands::bench(&cfg)?, config_text(&cfg))
        }
        "simulate" => {
            let mut cfg: ScenarioConfig = parse_config(text)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            (commands::simulate(&cfg)?, config_text(&cfg))
        }
        "sweep" => {
            let mut cfg: SweepGrid = parse_config(text)?;
            cfg.master_seed = seed.unwrap_or(cfg.master_seed);
            (commands::sweep(&cfg)?, config_text(&cfg))
        }
        _ => {
            let cfg: ReportConfig = parse_config(text)?;
            (commands::make_report(&cfg)?, config_text(&cfg))
        }
    };
    Ok((common.out_dir.clone(), artifacts, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok((dir, artifacts, cfg)) => match write_artifacts(&dir, &artifacts, &cfg) {
            Ok(()) => {
                println!("wrote {} files to {}", artifacts.len() + 1, dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", dir.display());
                ExitCode::FAILURE
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

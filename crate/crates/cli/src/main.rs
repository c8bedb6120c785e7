//! `ampcmp`: simulate dual-amplifier sessions, classify and compare
//! recordings.

mod commands;
mod config;
mod error;
mod tables;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use ampcmp::EventCode;
use clap::{Args, Parser, Subcommand};

use config::{parse_event_map, RunArgs};
use error::CliError;

#[derive(Parser)]
#[command(name = "ampcmp", version, about = "Dual-amplifier EEG comparison toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a session and render it through two virtual amplifiers.
    Simulate(RunArgs),
    /// Cross-validated AUROCC of the task pipeline per recording.
    Classify(RunArgs),
    /// Lag, polarity, correlations and paired AUROCC test for two recordings.
    Compare(RunArgs),
    /// Summarize a bundle directory or GDF file.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct InspectArgs {
    path: PathBuf,
    #[arg(long, value_parser = parse_event_map)]
    event_map: Option<BTreeMap<u16, EventCode>>,
    /// Also write `inspect.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args.resolve()?),
        Command::Classify(args) => commands::classify(&args.resolve()?),
        Command::Compare(args) => {
            let report = commands::compare(&args.resolve()?)?;
            if let Some(lag) = &report.lag {
                println!(
                    "lag {} samples ({:.4} s), polarity {}",
                    lag.lag_samples,
                    lag.lag_s,
                    i8::from(lag.polarity)
                );
            }
            for (name, pc) in &report.classification {
                println!(
                    "{name}: AUROCC {:.4} vs {:.4}, Wilcoxon p = {:.5}",
                    pc.cv.amp_a.mean(),
                    pc.cv.amp_b.mean(),
                    pc.wilcoxon.p_two_sided
                );
            }
            Ok(())
        }
        Command::Inspect(args) => {
            let map = args.event_map.unwrap_or_default();
            print!("{}", commands::inspect(&args.path, &map, args.out.as_deref())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

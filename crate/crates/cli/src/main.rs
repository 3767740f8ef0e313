mod artifact;
mod config;
mod cv;
mod error;
mod estimate;
mod input;
mod mc;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Estimation and inference on intersection bounds.
#[derive(Debug, Parser)]
#[command(name = "ibounds", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate one or both bounds from a CSV file.
    Estimate(estimate::EstimateArgs),
    /// Run the Monte Carlo study.
    Mc(mc::McArgs),
    /// Report critical values for a saved curve or a built-in fixture.
    Cv(cv::CvArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Estimate(args) => estimate::run(args),
        Command::Mc(args) => mc::run(args),
        Command::Cv(args) => cv::run(args),
    };
    match outcome {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

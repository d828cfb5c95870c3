//! `cmi`: conditional mean imputation, simulation and recruitment from the
//! command line.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Settings;

#[derive(Parser)]
#[command(name = "cmi", version, about = "Conditional mean imputation for a right-censored covariate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Shared {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Command {
    /// Impute censored w in a table with columns y, w, delta, z_1..z_p.
    Impute(Shared),
    /// Run a simulation scenario and summarise bias, SE and efficiency.
    Simulate(Shared),
    /// Rank censored subjects for trial recruitment under both approaches.
    Recruit(Shared),
    /// Compare tail extensions and interpolations on simulated data.
    ExtendStudy(Shared),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<io::ParseError>() || err.is::<commands::UsageError>() {
        return 2;
    }
    match err.downcast_ref::<cmi_core::Error>() {
        Some(cmi_core::Error::ScenarioFailed(_)) => 4,
        Some(_) => 3,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (shared, action): (Shared, fn(&Settings) -> anyhow::Result<()>) = match cli.command {
        Command::Impute(s) => (s, commands::impute),
        Command::Simulate(s) => (s, commands::simulate),
        Command::Recruit(s) => (s, commands::recruit),
        Command::ExtendStudy(s) => (s, commands::extend_study),
    };
    let file = match &shared.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    action(&shared.settings.over(file))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

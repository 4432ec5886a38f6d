//! `ehrenfest`: batch front end for rest points, normal modes, spectra and
//! moment dynamics of the built-in Hartree-type models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod hook;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Outcome, Overrides};
use crate::config::{parse_mode, parse_nu, RunConfig};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "ehrenfest", version, about = "Semiclassical spectra and moment dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Largest quantum numbers, e.g. "3,3,3".
    #[arg(long, global = true, value_name = "LIST")]
    nu_max: Option<String>,
    #[arg(long, global = true)]
    t_final: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// order0, order2 or split.
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Locate the rest point.
    Restpoint,
    /// Normal modes at the rest point.
    Modes,
    /// Energy levels up to `nu_max`.
    Spectrum,
    /// Integrate the moment system and write a CSV trajectory.
    Evolve,
    /// Integrated action of stationary levels and the quantization identity.
    Action,
    /// Run the derivative, mode, oracle and action checks.
    Validate,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let ov = Overrides {
        nu_max: cli.nu_max.as_deref().map(parse_nu).transpose()?,
        t_final: cli.t_final,
        dt: cli.dt,
        mode: cli.mode.as_deref().map(parse_mode).transpose()?,
    };
    match cli.command {
        Command::Restpoint => commands::cmd_restpoint(&cfg),
        Command::Modes => commands::cmd_modes(&cfg),
        Command::Spectrum => commands::cmd_spectrum(&cfg, &ov),
        Command::Evolve => commands::cmd_evolve(&cfg, &ov),
        Command::Action => commands::cmd_action(&cfg, &ov),
        Command::Validate => commands::cmd_validate(&cfg, &ov),
    }
}

fn emit(cli: &Cli, outcome: Outcome) -> Result<Option<CliError>, CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, &outcome.body)?,
        None => std::io::stdout().lock().write_all(&outcome.body)?,
    }
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    Ok(outcome.failure)
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return fail(&CliError::Usage(e.kind().to_string()));
        }
    };
    match run(&cli).and_then(|o| emit(&cli, o)) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(e)) | Err(e) => fail(&e),
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quintic_cli::commands::{run, CliError, Command};
use quintic_cli::config::{parse_config_for, ConfigError};

#[derive(Parser)]
#[command(
    name = "quintic",
    version,
    about = "Threshold experiments for the focusing quintic wave equation in 3D radial symmetry"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file; absent keys take their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Ground state, unstable mode and spectral certificate.
    Spectrum(RunArgs),
    /// One nonlinear run at coefficient `evolve.c`.
    Evolve(RunArgs),
    /// Bisect the blowup/decay threshold of a family.
    Threshold(RunArgs),
    /// Ejection rates and exit times around the threshold.
    Ejection(RunArgs),
    /// Paired-run bootstrap ratios on the ejection window.
    Bootstrap(RunArgs),
    /// Threshold displacement against family scale.
    Hscaling(RunArgs),
    /// Radiation decay on the threshold trajectory and linear dispersive checks.
    Dispersive(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Spectrum(a) => (Command::Spectrum, a),
        Sub::Evolve(a) => (Command::Evolve, a),
        Sub::Threshold(a) => (Command::Threshold, a),
        Sub::Ejection(a) => (Command::Ejection, a),
        Sub::Bootstrap(a) => (Command::Bootstrap, a),
        Sub::Hscaling(a) => (Command::Hscaling, a),
        Sub::Dispersive(a) => (Command::Dispersive, a),
    };
    match execute(cmd, &args) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("quintic {}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command, args: &RunArgs) -> Result<Vec<String>, CliError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError {
            line: 0,
            message: format!("{}: {e}", p.display()),
        })?,
        None => String::new(),
    };
    let cfg = parse_config_for(&text, cmd.needs_family())?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    run(cmd, &cfg, &out)
}

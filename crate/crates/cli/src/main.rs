use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paraburgers_cli::commands::{dispatch, Command};
use paraburgers_cli::config::parse_config;
use paraburgers_cli::output::{failure_records, Check};

#[derive(Parser)]
#[command(name = "paraburgers", version, about = "Paradifferential experiments for the weakly dispersive Burgers family")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Io {
    /// Flat `key = value` configuration file.
    config: PathBuf,
    /// Directory receiving the outputs and the run manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate the equation and write diagnostics and snapshots.
    Simulate(Io),
    /// Check the symbolic calculus.
    VerifyCalculus(Io),
    /// Check the gauge flow identities.
    VerifyFlow(Io),
    /// Check the commutator and nonlinear gauge equations.
    VerifyGauge(Io),
    /// Run the energy-estimate study on the configured trajectory.
    Estimate(Io),
    /// Run the conjugation study on the configured trajectory.
    Conjugate(Io),
    /// Tabulate blow-up outcomes over the configured (alpha, amplitude) grid.
    Scan(Io),
}

/// A record for an error that stopped the run before any check could be made.
fn failure(name: &str, message: String) -> Check {
    Check {
        name: name.to_string(),
        expected: format!("success ({message})"),
        actual: f64::NAN,
        tolerance: 0.0,
        passed: false,
        observed: false,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, io) = match cli.command {
        Sub::Simulate(io) => (Command::Simulate, io),
        Sub::VerifyCalculus(io) => (Command::VerifyCalculus, io),
        Sub::VerifyFlow(io) => (Command::VerifyFlow, io),
        Sub::VerifyGauge(io) => (Command::VerifyGauge, io),
        Sub::Estimate(io) => (Command::Estimate, io),
        Sub::Conjugate(io) => (Command::Conjugate, io),
        Sub::Scan(io) => (Command::Scan, io),
    };
    let cfg = match parse_config(&io.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            print!("{}", failure_records(&[failure("config", e.to_string())]));
            return ExitCode::FAILURE;
        }
    };
    match dispatch(cmd, &cfg, &io.out) {
        Ok(outcome) => {
            for c in &outcome.checks {
                let mark = match (c.observed, c.passed) {
                    (true, _) => "note",
                    (false, true) => "pass",
                    (false, false) => "FAIL",
                };
                eprintln!("{mark} {}: {:e} ({})", c.name, c.actual, c.expected);
            }
            if let Some(s) = &outcome.summary {
                eprintln!("{}: {s}", cmd.name());
            }
            print!("{}", failure_records(&outcome.checks));
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", cmd.name());
            print!("{}", failure_records(&[failure(cmd.name(), e.to_string())]));
            ExitCode::FAILURE
        }
    }
}

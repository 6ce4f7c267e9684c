use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rodflow::cli::{cmd_verify, run_config_command, Command, Outcome, EXIT_FAILED, EXIT_OK};

#[derive(Parser)]
#[command(name = "rodflow", version, about = "Hamiltonian rod hierarchy: simulation, reduction, sections and Lax checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a body state and record the invariant ledger.
    Simulate { config: PathBuf },
    /// Integrate the reduced canonical system alongside the body flow.
    Reduce { config: PathBuf },
    /// Seed a level set and collect Poincaré sections.
    Poincare { config: PathBuf },
    /// Compare the Lax equations with the direct flow.
    LaxCheck { config: PathBuf },
    /// Run a verification suite (or `all`).
    Verify {
        suite: String,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(outcome: &Outcome) {
    for line in &outcome.summary {
        println!("{line}");
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, config) = match cli.command {
        Cmd::Verify { suite, out } => {
            return match cmd_verify(&suite, out.as_deref()) {
                Ok((reports, outcome)) => {
                    report(&outcome);
                    let ok = reports.iter().all(|r| r.passed);
                    ExitCode::from(if ok { EXIT_OK } else { EXIT_FAILED } as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
        Cmd::Simulate { config } => (Command::Simulate, config),
        Cmd::Reduce { config } => (Command::Reduce, config),
        Cmd::Poincare { config } => (Command::Poincare, config),
        Cmd::LaxCheck { config } => (Command::LaxCheck, config),
    };
    let (code, result) = run_config_command(command, &config);
    match result {
        Ok(outcome) => report(&outcome),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(code as u8)
}

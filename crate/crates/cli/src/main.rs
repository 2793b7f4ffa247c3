use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cloud_ksvd_cli::{run_scenario, write_report, CliError, Overrides, Result, Scenario};

#[derive(Parser)]
#[command(
    name = "cloud-ksvd",
    version,
    about = "Run cloud K-SVD experiments and write CSV curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario named by --scenario or the config file.
    Run(Common),
    /// Centralized vs cloud vs local representation error.
    SynthCompare(Common),
    /// Distributed power method error floors per consensus budget.
    DpmFloor(Common),
    /// Atom error against centralized K-SVD over T_p and T_c.
    AtomError(Common),
    /// Warm-restarted K-SVD on a bounded buffer of arriving batches.
    Online(Common),
    /// Analysis constants from lasso-coded runs.
    Constants(Common),
    /// Minimum-residue digit classification.
    Mnist(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file with experiment fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn execute(cli: Cli) -> Result<()> {
    let (fixed, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::SynthCompare(c) => (Some(Scenario::SynthCompare), c),
        Command::DpmFloor(c) => (Some(Scenario::DpmFloor), c),
        Command::AtomError(c) => (Some(Scenario::AtomError), c),
        Command::Online(c) => (Some(Scenario::Online), c),
        Command::Constants(c) => (Some(Scenario::Constants), c),
        Command::Mnist(c) => (Some(Scenario::Mnist), c),
    };
    let file = match &common.config {
        Some(path) => Overrides::from_file(path)?,
        None => Overrides::default(),
    };
    let mut merged = common.overrides.layered_over(file);
    if let Some(s) = fixed {
        match merged.scenario {
            Some(other) if other != s => {
                return Err(CliError::Config(format!(
                    "subcommand {s} conflicts with scenario {other}"
                )));
            }
            _ => merged.scenario = Some(s),
        }
    }
    let cfg = merged.resolve()?;
    let report = run_scenario(&cfg)?;
    for line in &report.summary {
        println!("{line}");
    }
    for path in write_report(&cfg.out, &cfg, &report)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

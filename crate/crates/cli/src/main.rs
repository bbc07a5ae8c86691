//! `flipflop`: equilibria, trajectories, limit cycles and parameter sweeps of
//! the switched energy balance model.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};

use config::{Scenario, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "flipflop", version, about = "Glacial flip-flop cycles in a two-albedo-line energy balance model")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set params.eps=0.3`.
    #[arg(long = "set", global = true, value_name = "K=V")]
    sets: Vec<String>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Equilibria of the reduced flow and their lifts to both branches.
    Equilibria,
    /// Trajectory of the reduced or switched system.
    Simulate,
    /// The attracting limit cycle by iteration of the return map.
    Cycle,
    /// Limit cycles over a grid of eps, T_cN^- and rho.
    Sweep,
    /// Crossing, sliding or tangency labels of points on the switching manifold.
    Classify,
}

impl From<Command> for Scenario {
    fn from(c: Command) -> Self {
        match c {
            Command::Equilibria => Scenario::Equilibria,
            Command::Simulate => Scenario::Simulate,
            Command::Cycle => Scenario::Cycle,
            Command::Sweep => Scenario::Sweep,
            Command::Classify => Scenario::Classify,
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Solver(e) | Failure::Io(e) => e,
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::load(cli.config.as_deref(), &cli.sets).map_err(Failure::Config)?;
    if let Some(cmd) = cli.command {
        cfg.scenario = Some(cmd.into());
    }
    if cli.dump_config {
        print!("{}", cfg.to_toml().map_err(Failure::Config)?);
        return Ok(());
    }
    if cli.jobs == Some(0) {
        return Err(Failure::Config(anyhow!("--jobs must be at least 1")));
    }
    let scenario = cfg
        .scenario
        .ok_or_else(|| Failure::Config(anyhow!("no scenario: give a subcommand or set `scenario` in the config")))?;

    flipflop_core::equilibria::self_check().map_err(|e| Failure::Solver(e.into()))?;

    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Io(anyhow!("creating {}: {e}", cli.out.display())))?;
    match scenario {
        Scenario::Equilibria => run::equilibria(&cfg, &cli.out),
        Scenario::Simulate => run::simulate(&cfg, &cli.out),
        Scenario::Cycle => run::cycle(&cfg, &cli.out),
        Scenario::Sweep => run::sweep(&cfg, &cli.out, cli.jobs),
        Scenario::Classify => run::classify(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}

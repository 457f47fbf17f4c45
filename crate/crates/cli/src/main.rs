//! Command-line front end: solve single instances and run scenario sweeps
//! that write CSV tables.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use relay_alloc::experiments::{
    emit_csv, oracle_table, oracle_trials, outage_table, region_table, region_trials, sweep,
    sweep_table, ScenarioConfig, Table,
};
use relay_alloc::{solve, ProblemInstance, SolverOptions};

#[derive(Parser)]
#[command(name = "relay-alloc", version, about = "Resource allocation for OFDM two-way relaying")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance file and print the outcome as JSON.
    Solve {
        instance: PathBuf,
        /// Write the outcome here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Re-derive inner powers by brute force and report the deviation.
        #[arg(long)]
        oracle_check: bool,
    },
    /// Sum rate, outage, occupancy and mode shares per cell.
    Sweep(ScenarioArgs),
    /// Outage fraction per cell.
    Outage(ScenarioArgs),
    /// Equal-power set-basis versus pairing two-way sum rates.
    Region(ScenarioArgs),
    /// Solver versus exhaustive search on small instances.
    OracleCheck(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    scenario: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trials per cell.
    #[arg(long)]
    trials: Option<usize>,
    /// CSV output path; defaults to the scenario's `output` or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::read(&self.scenario)?;
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(t) = self.trials {
            cfg.n_trials = t;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        cfg.validate()?;
        if let Some(n) = self.threads {
            if n == 0 {
                bail!("--threads must be at least 1");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the worker pool")?;
        }
        Ok(cfg)
    }
}

fn write_table(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => emit_csv(table, path)?,
        None => std::io::stdout().write_all(table.to_csv_string()?.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { instance, out, oracle_check } => {
            let inst = ProblemInstance::read(&instance)?;
            let opts = SolverOptions { oracle_check, ..SolverOptions::default() };
            let outcome = solve(&inst, &opts)?;
            let text = serde_json::to_string_pretty(&outcome)?;
            match out {
                Some(path) => std::fs::write(&path, text + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
        }
        Command::Sweep(args) => {
            let cfg = args.load()?;
            write_table(&sweep_table(&sweep(&cfg)?), cfg.output.as_deref())?;
        }
        Command::Outage(args) => {
            let cfg = args.load()?;
            write_table(&outage_table(&sweep(&cfg)?), cfg.output.as_deref())?;
        }
        Command::Region(args) => {
            let cfg = args.load()?;
            write_table(&region_table(&region_trials(&cfg)?), cfg.output.as_deref())?;
        }
        Command::OracleCheck(args) => {
            let cfg = args.load()?;
            write_table(&oracle_table(&oracle_trials(&cfg)?), cfg.output.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

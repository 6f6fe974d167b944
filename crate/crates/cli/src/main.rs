//! `spde-kit`: simulate, measure convergence, tabulate cost and validate
//! assumptions for the built-in SPDE problems.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure (or a failed check under `validate`).

mod commands;
mod config;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit 1.
    Config(String),
    /// The numerics failed: exit 2.
    Numerical(String),
}

impl CliError {
    pub fn from_core(e: spde_core::Error) -> Self {
        use spde_core::Error as E;
        match e {
            E::BlowUp { .. } | E::NonFinite { .. } | E::Experiment(_) => Self::Numerical(e.to_string()),
            E::InvalidParameter { .. }
            | E::Unsupported { .. }
            | E::Io(_)
            | E::Aliasing { .. }
            | E::DimensionMismatch { .. } => Self::Config(e.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) | Self::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<spde_core::Error> for CliError {
    fn from(e: spde_core::Error) -> Self {
        Self::from_core(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spde-kit",
    version,
    about = "Spectral Galerkin SPDE integrators: simulation, convergence, cost and validation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one path per scheme and step count; print the terminal state and its cost.
    Simulate,
    /// Strong errors against a fine reference; writes a CSV and fits temporal orders.
    Convergence,
    /// Cost ledgers, effective orders and budget allocations for every scheme.
    Cost,
    /// Check the standing assumptions and the commutativity condition.
    Validate,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Schemes, comma separated (ees, lie, mil, dfm, dfmm).
    #[arg(long, global = true, value_delimiter = ',')]
    scheme: Option<Vec<String>>,
    /// Built-in problem: heatmul, rankone or adversarial.
    #[arg(long, global = true)]
    problem: Option<String>,
    /// Galerkin modes.
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Noise modes.
    #[arg(long = "K", global = true)]
    k: Option<usize>,
    /// Time step counts, comma separated.
    #[arg(long = "M", global = true, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte-Carlo runs; falls back to SPDE_KIT_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output CSV.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set problem.sigma=0.2`.
    #[arg(long, global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            schemes: self
                .scheme
                .as_ref()
                .map(|s| s.iter().map(|x| x.trim().to_ascii_lowercase()).collect()),
            problem: self.problem.as_ref().map(|p| p.trim().to_ascii_lowercase()),
            n: self.n,
            k: self.k,
            m: self.m.clone(),
            paths: self.paths,
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            set: self.set.clone(),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = config::load(cli.common.config.as_deref(), &cli.common.overrides())?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Convergence => commands::convergence(&cfg),
        Command::Cost => commands::cost(&cfg),
        Command::Validate => validate::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Solve, simulate and certify mean-payoff bidding games.
#[derive(Debug, Parser)]
#[command(name = "bidding", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Random-turn value, potentials and strengths at a given or derived p.
    Solve(Flags),
    /// Monte Carlo payoff estimate for a pair of strategies.
    Simulate(Flags),
    /// Replays a trace (or a fresh simulation) through the ledger checkers.
    Certify(Flags),
    /// Decides a parity bidding game for both players.
    Parity(Flags),
    /// Random-turn value over a grid of p.
    Sweep(Flags),
}

/// Every flag overrides the matching field of `--config`.
#[derive(Debug, Args, Clone, Default)]
pub struct Flags {
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Graph JSON file.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// fp-richman, fp-poorman, ap-richman, ap-poorman, taxman:tau=T, asym:W=W.
    #[arg(long)]
    pub mechanism: Option<String>,
    /// Max strategy spec, e.g. ap-richman-mixed:eps=0.5.
    #[arg(long)]
    pub max: Option<String>,
    /// Min strategy spec, e.g. dual:ap-richman-mixed:eps=0.5 or uniform.
    #[arg(long)]
    pub min: Option<String>,
    #[arg(long)]
    pub budget_max: Option<f64>,
    #[arg(long)]
    pub budget_min: Option<f64>,
    /// Epsilon for `magic` checks when the Max strategy has none.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file for the JSON report (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated: replay, conservation, invariant, h-bound,
    /// energy-bound, lift, magic, all.
    #[arg(long)]
    pub checks: Option<String>,
    /// Coin bias for `solve`; derived from mechanism and budgets when absent.
    #[arg(long)]
    pub p: Option<f64>,
    /// pure or mixed, for deriving p.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub start: Option<usize>,
    /// JSON-lines dump of trial 0 (`simulate`).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// JSON-lines trace to certify.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// p grid for `sweep`: "a:b:step" or a comma list.
    #[arg(long)]
    pub grid: Option<String>,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Numeric(String),
    /// Report already written; some check failed.
    CheckFailed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::CheckFailed => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Solve(f) => commands::solve(f),
        Command::Simulate(f) => commands::simulate(f),
        Command::Certify(f) => commands::certify(f),
        Command::Parity(f) => commands::parity(f),
        Command::Sweep(f) => commands::sweep(f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) | CliError::Validation(m) | CliError::Numeric(m) => {
                    eprintln!("error: {m}")
                }
                CliError::CheckFailed => eprintln!("certification failed"),
            }
            ExitCode::from(e.code())
        }
    }
}

//! `genmeter` command-line front end: sweep, measure, stats and plot stages
//! over a shared run store.

pub mod commands;
pub mod plot;
pub mod tables;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_measure, cmd_plot, cmd_stats, cmd_sweep, Outcome};

pub const STORE_ENV: &str = "GENMETER_STORE";

#[derive(Debug, Parser)]
#[command(name = "genmeter", version, about = "Generalization-measure sweeps, statistics and plots")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Worker threads (0 = one per core, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Added to every training seed; also changes run ids.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed_offset: u64,
    /// error | warn | info | debug | trace
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a hyperparameter grid.
    Sweep {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Compute generalization measures on stored runs.
    Measure {
        #[command(subcommand)]
        action: MeasureAction,
    },
    /// Write psi_table.csv, sign_error.csv, cmi.csv and measures.csv.
    Stats {
        #[arg(env = STORE_ENV)]
        store: PathBuf,
        /// Comma-separated `iid` / `shift:<n>`; default is iid plus every
        /// shift severity present in the store.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG figures from a stats output directory.
    Plot { dir: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum SweepAction {
    Run {
        config: PathBuf,
        #[arg(long, env = STORE_ENV, default_value = "genmeter-store")]
        store: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum MeasureAction {
    Compute {
        #[arg(env = STORE_ENV)]
        store: PathBuf,
        /// Comma-separated categories and/or measure names.
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        recompute: bool,
    },
}

/// Dispatch one parsed command line.
pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let g = &cli.global;
    genmeter_core::exec::with_jobs(g.jobs, || match &cli.command {
        Command::Sweep { action: SweepAction::Run { config, store } } => cmd_sweep(config, store, g),
        Command::Measure { action: MeasureAction::Compute { store, only, recompute } } => {
            cmd_measure(store, only.as_deref(), *recompute, g)
        }
        Command::Stats { store, targets, out } => cmd_stats(store, targets, out, g),
        Command::Plot { dir } => cmd_plot(dir),
    })
}

/// `genmeter-error: <kind>: <message>` on one line.
pub fn error_line(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<genmeter_core::Error>().map(|c| c.kind()))
        .or_else(|| err.downcast_ref::<csv::Error>().map(|_| "csv"))
        .or_else(|| err.downcast_ref::<std::io::Error>().map(|_| "io"))
        .unwrap_or("error");
    let msg = format!("{err:#}").replace('\n', " ");
    format!("genmeter-error: {kind}: {msg}")
}

//! `srcloc`: generate networks, simulate cascades, estimate sources, and
//! run Monte Carlo experiments.
//!
//! Exit codes: 0 success, 2 invalid input, 3 degenerate estimate (tie or
//! direction-only fallback; output is still written), 4 internal error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "srcloc", version, about = "Locate the source of a diffusion from sparse observers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Er,
    Ba,
    Apollonian,
    Tree,
    Path,
    Star,
    Cycle,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auto,
    Tree,
    Graph,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated network as an edge list.
    Generate {
        #[arg(value_enum)]
        family: Family,
        /// Node count (er, ba, tree, path, cycle, complete).
        #[arg(long)]
        n: Option<usize>,
        /// Edge probability (er).
        #[arg(long, conflicts_with = "np")]
        p: Option<f64>,
        /// Expected degree N·p (er).
        #[arg(long)]
        np: Option<f64>,
        /// Edges per new node (ba).
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long)]
        generations: Option<u32>,
        #[arg(long)]
        leaves: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate cascades from a source and record what the observers see.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        source: usize,
        /// Observer file (one id per line), `random:K`, or `degree:K`.
        #[arg(long)]
        observers: String,
        #[arg(long, default_value_t = 4.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// With more than one cascade, `--out` names a directory.
        #[arg(long, default_value_t = 1)]
        cascades: usize,
        #[arg(long, default_value_t = 0.0)]
        start_time: f64,
        /// Observers informed after this time stay silent.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump every node's arrival time and parent (single cascade).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Rank candidate sources for one or more observation files.
    Estimate {
        #[arg(long)]
        graph: PathBuf,
        /// Observation CSV; repeat to fuse several cascades.
        #[arg(long, required_unless_present = "cascades_dir")]
        observations: Vec<PathBuf>,
        /// Directory of observation CSVs, one per cascade.
        #[arg(long, conflicts_with = "observations")]
        cascades_dir: Option<PathBuf>,
        /// Deployed observers (file, `random:K`, `degree:K`); overrides the
        /// `# observers:` line of the observation files.
        #[arg(long)]
        observers: Option<String>,
        /// Seed for `random:K` observers.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a key-value config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Error that is not the user's fault.
#[derive(Debug)]
pub struct InternalError(pub String);

impl std::fmt::Display for InternalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InternalError {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| commands::run(cli.command)) {
        Ok(Ok(commands::Outcome::Done)) => ExitCode::SUCCESS,
        Ok(Ok(commands::Outcome::Degenerate)) => ExitCode::from(3),
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InternalError>().is_some() {
                ExitCode::from(4)
            } else {
                ExitCode::from(2)
            }
        }
        Err(_) => ExitCode::from(4),
    }
}

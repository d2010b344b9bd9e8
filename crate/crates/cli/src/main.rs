//! `pot`: run simulations, check and compact chain snapshots, sweep
//! parameters and emit chart data.
//!
//! Exit codes: 0 success, 1 validation findings, 2 usage error.

/// Print to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod charts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "pot",
    version,
    about = "Proof-of-Turn simulator and chain tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and print its trace digest
    Run {
        #[command(flatten)]
        sim: SimFlags,
        /// Directory for the trace, metric CSVs and the final chain of n0
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a chain snapshot; exits 1 when anything is wrong
    Validate {
        file: PathBuf,
        /// Expected genesis block hash, hex
        #[arg(long)]
        genesis: Option<String>,
    },
    /// Prune a simulated chain snapshot as its designated collector
    Prune {
        file: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        /// Highest height treated as final; defaults to the tip
        #[arg(long)]
        final_height: Option<u64>,
        /// Directory receiving pruned.potc
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a grid of simulations in parallel and tabulate the metrics
    Sweep {
        #[command(flatten)]
        sim: SimFlags,
        /// Axis as KEY=V1,V2,...; repeat for a cartesian product
        #[arg(long = "vary", value_name = "KEY=VALUES", required = true)]
        vary: Vec<String>,
        /// Worker threads; defaults to the number of CPUs
        #[arg(long)]
        jobs: Option<usize>,
        /// Directory receiving sweep.csv; stdout otherwise
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit chart data as CSV
    Charts(charts::ChartArgs),
    /// Summarize a chain snapshot
    Inspect { file: PathBuf },
}

/// One flag per configuration key. Unset flags leave the file or default
/// value in place.
#[derive(Debug, Clone, Default, Args)]
pub struct SimFlags {
    /// Flat key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub nodes: Option<String>,
    #[arg(long)]
    pub turn: Option<String>,
    #[arg(long)]
    pub transition: Option<String>,
    /// Vote threshold as a fraction, e.g. 1/2
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long, value_parser = ["pull", "push", "mixed"])]
    pub peering: Option<String>,
    #[arg(long, value_parser = ["none", "prune", "child", "meta"])]
    pub storage: Option<String>,
    /// Fault script
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<String>,
    #[arg(long)]
    pub latency: Option<String>,
    #[arg(long)]
    pub rounds: Option<String>,
    #[arg(long)]
    pub grace: Option<String>,
    #[arg(long)]
    pub stall_turns: Option<String>,
    #[arg(long)]
    pub activity_window: Option<String>,
    #[arg(long)]
    pub tx_size: Option<String>,
    #[arg(long)]
    pub prune_cap: Option<String>,
    #[arg(long)]
    pub flood_txs: Option<String>,
    #[arg(long)]
    pub meta_tail: Option<String>,
}

impl SimFlags {
    /// Flag values keyed by their configuration-file names.
    pub fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("seed", &self.seed),
            ("nodes", &self.nodes),
            ("turn", &self.turn),
            ("transition", &self.transition),
            ("theta", &self.theta),
            ("peering", &self.peering),
            ("storage", &self.storage),
            ("scenario", &self.scenario),
            ("latency", &self.latency),
            ("rounds", &self.rounds),
            ("grace", &self.grace),
            ("stall_turns", &self.stall_turns),
            ("activity_window", &self.activity_window),
            ("tx_size", &self.tx_size),
            ("prune_cap", &self.prune_cap),
            ("flood_txs", &self.flood_txs),
            ("meta_tail", &self.meta_tail),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Something was checked and found wrong.
    Findings,
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Findings => 1,
            Failure::Usage(_) => 2,
        }
    }
}

pub fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { sim, out } => commands::run(&sim, out.as_deref()),
        Command::Validate { file, genesis } => commands::validate(&file, genesis.as_deref()),
        Command::Prune {
            file,
            sim,
            final_height,
            out,
        } => commands::prune(&file, &sim, final_height, &out),
        Command::Sweep {
            sim,
            vary,
            jobs,
            out,
        } => commands::sweep(&sim, &vary, jobs, out.as_deref()),
        Command::Charts(args) => charts::charts(&args),
        Command::Inspect { file } => commands::inspect(&file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Failure::Usage(m) = &f {
                eprintln!("error: {m}");
            }
            ExitCode::from(f.code())
        }
    }
}

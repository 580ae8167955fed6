//! Command-line driver: training runs, evaluation matrices, sweeps, field
//! dumps and episode replays. Every verb writes a `manifest.json` into its
//! output directory.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Failure, Outcome};

/// Exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "insertion", version, about = "Potential-field plus residual-RL plug insertion experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed list with this single seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Restricts the run to one variant.
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Trained policy for learned variants.
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Verb {
    /// Train one variant on the first configured scene.
    Train,
    /// Evaluate variants over scenes × noise levels.
    Eval,
    /// Train every learned variant per seed, then evaluate the full matrix.
    Sweep,
    /// Write the potential field over a y–z grid for each scene.
    FieldDump,
    /// Re-run one evaluation episode and write its trace.
    Replay {
        /// Scene name (defaults to the first configured scene).
        #[arg(long)]
        scene: Option<String>,
        /// Plug noise level in mm/° (defaults to the first configured level).
        #[arg(long)]
        noise: Option<f64>,
        /// Episode index within the seed's evaluation stream.
        #[arg(long, default_value_t = 0)]
        episode: usize,
    },
}

/// Parses `argv` and runs the verb; returns the process exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(outcome) => {
            for line in outcome.summary {
                println!("{line}");
            }
            EXIT_OK
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("runtime failure: {e:#}");
            EXIT_RUNTIME
        }
    }
}

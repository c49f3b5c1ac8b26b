//! Command line driver for alignment experiments.
//!
//! Subcommands synthesize archives, preprocess them, dump aligned copies,
//! run the offline and online evaluation protocols, and render score tables.
//! Configuration lives in a strict JSON file; see the repository README for
//! the schema. Every run writes `run.json` with the resolved configuration
//! so artifacts are self-describing.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "eegalign", version, about = "Cross-subject EEG alignment experiments")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory the artifacts are written to.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed from the configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the evaluation harness; 0 uses one per core.
    /// Results are identical for every thread count.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generates a synthetic dataset archive.
    Synth,
    /// Band-pass filters, re-epochs, and downsamples an archive.
    Preprocess,
    /// Writes a Euclidean-aligned copy of an archive plus the per-subject
    /// reference matrices.
    Align,
    /// Runs leave-one-subject-out evaluation and writes report.json and
    /// scores.csv.
    EvalOffline,
    /// Runs the simulated-online protocol and writes report.json and
    /// scores.csv.
    EvalOnline,
    /// Renders score CSVs into aligned markdown tables.
    Report {
        /// Score CSV files produced by the eval commands; columns are
        /// compared against the first file.
        inputs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

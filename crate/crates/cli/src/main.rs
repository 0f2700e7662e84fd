//! `tempo-traditions`: cluster recorded-performance tempo data into coexisting
//! traditions and report them.

mod commands;
mod config;
mod output;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tempo_core::validity::ValidityPolicy;

use crate::commands::{cmd_analyze, cmd_report, cmd_synth, cmd_validate_k, Failure, ValidateKArgs};
use crate::config::{parse_formats, Format, RunConfig};

#[derive(Parser)]
#[command(
    name = "tempo-traditions",
    version,
    about = "Tempo-tradition analysis of recorded-performance corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PolicyArgs {
    /// Minimum mean silhouette for accepting three clusters.
    #[arg(long, default_value_t = 0.40)]
    min_silhouette: f64,
    /// Minimum members per cluster for accepting three clusters.
    #[arg(long, default_value_t = 1)]
    min_cluster_size: usize,
    /// How far the k=3 silhouette may trail k=2.
    #[arg(long, default_value_t = 0.02)]
    silhouette_slack: f64,
}

impl PolicyArgs {
    fn policy(&self) -> ValidityPolicy {
        ValidityPolicy {
            min_silhouette: self.min_silhouette,
            min_cluster_size: self.min_cluster_size,
            silhouette_slack: self.silhouette_slack,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over every movement of a corpus.
    Analyze {
        /// Directory holding movements.csv, recordings.csv and bars.csv.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Maximum number of traditions per movement (2 or 3).
        #[arg(long = "k", default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1970)]
        split_year: i32,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Comma-separated subset of text,json,csv,svg.
        #[arg(long, default_value = "text,json,csv,svg", value_parser = parse_formats)]
        formats: BTreeSet<Format>,
        /// Worker threads (0 = one per processor).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Use a colour-blind-safe palette in SVG output.
        #[arg(long)]
        colorblind: bool,
    },
    /// Print WCSS and silhouette scores over a range of k.
    ValidateK {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Generate a synthetic corpus from a JSON spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the seeds in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-emit tables, CSV and SVG from an existing report.json.
    Report {
        /// report.json written by `analyze`.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "text,csv,svg", value_parser = parse_formats)]
        formats: BTreeSet<Format>,
        #[arg(long)]
        colorblind: bool,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze {
            corpus,
            out,
            k,
            restarts,
            seed,
            split_year,
            policy,
            formats,
            jobs,
            colorblind,
        } => cmd_analyze(&RunConfig {
            corpus_dir: corpus,
            out_dir: out,
            k_target: k,
            restarts,
            seed,
            split_year,
            policy: policy.policy(),
            formats,
            jobs,
            colorblind,
        }),
        Command::ValidateK {
            corpus,
            out,
            k_min,
            k_max,
            restarts,
            seed,
            policy,
        } => cmd_validate_k(&ValidateKArgs {
            corpus_dir: corpus,
            out_dir: out,
            k_min,
            k_max,
            restarts,
            seed,
            policy: policy.policy(),
        }),
        Command::Synth { spec, out, seed } => cmd_synth(&spec, &out, seed),
        Command::Report {
            from,
            corpus,
            out,
            formats,
            colorblind,
        } => cmd_report(&from, &corpus, &out, &formats, colorblind),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

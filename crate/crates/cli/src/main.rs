//! `vlcorpus`: build, inspect and evaluate vision-language corpora.

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "vlcorpus", version, about = "Vision-language corpus pipeline")]
pub struct Cli {
    /// Pipeline configuration (TOML). Flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pair embedded PDF figures with their captions.
    ExtractPdf(ExtractArgs),
    /// Search an encyclopedia API and download captioned article images.
    Harvest(HarvestArgs),
    /// Rewrite captions through a chat-completions endpoint.
    Refine(RefineArgs),
    #[command(subcommand)]
    Corpus(CorpusCommand),
    #[command(subcommand)]
    Stats(StatsCommand),
    #[command(subcommand)]
    Instruct(InstructCommand),
    /// Train a gate on synthetic clusters and check the top-k math.
    MoeDemo(MoeArgs),
    /// Print the layer table of a base+donor merge.
    MergePlan(MergeArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// A PDF file or a directory of PDFs.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub exclusion_list: Option<PathBuf>,
    #[arg(long)]
    pub min_px: Option<u32>,
    #[arg(long)]
    pub max_aspect: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Site root serving the search API and article pages.
    #[arg(long)]
    pub site: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub host_spacing_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// `wiki`, `paper_concise` or `paper_reasoned`.
    #[arg(long)]
    pub template: Option<String>,
    /// Harvest or extract-pdf output directory. Repeatable.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Environment variable holding the bearer token.
    #[arg(long)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Add refined captions or ready-made records to a store.
    Add {
        #[arg(long)]
        store: PathBuf,
        /// Refine output directories. Repeatable.
        #[arg(long = "from")]
        from: Vec<PathBuf>,
        /// JSONL files of complete records. Repeatable.
        #[arg(long)]
        records: Vec<PathBuf>,
    },
    /// Assign every record to train or test.
    Split {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a self-contained dataset directory.
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "corpus")]
        name: String,
    },
    /// Count records by source and split.
    Stats {
        #[arg(long)]
        store: PathBuf,
    },
    /// Render an exported dataset into a chat-template text file.
    Render {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "idefics_style")]
        family: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Token-count histograms for questions, answers and both.
    Tokens {
        #[arg(long)]
        dataset: PathBuf,
        /// `whitespace` or a `tokenizer.json` path.
        #[arg(long)]
        adapter: Option<String>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Image width and height histograms.
    Resolutions {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum InstructCommand {
    /// Turn simulation outputs into instruction records in a store.
    Build {
        /// JSONL of simulation samples.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Score model responses against an exported dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// JSONL lines of `{"id": ..., "response": ...}`.
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one split.
        #[arg(long)]
        split: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct MoeArgs {
    #[arg(long, default_value_t = 3)]
    pub experts: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 50)]
    pub per_expert: usize,
    #[arg(long, default_value_t = 500)]
    pub held_out: usize,
    /// Cluster mean distance from the origin, in units of sigma.
    #[arg(long, default_value_t = 5.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long, default_value_t = 32)]
    pub base: usize,
    #[arg(long, default_value_t = 8)]
    pub donor: usize,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match commands::run(cli, std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", Failure::from_anyhow(&e).to_json());
            ExitCode::FAILURE
        }
    }
}

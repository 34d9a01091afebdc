mod analysis;
mod corpus;
mod model;
mod pipeline;

use anyhow::Result;
use serde::Serialize;
use vlcorpus::Exec;

use crate::config::PipelineConfig;
use crate::manifest::Recorder;
use crate::{Cli, Command, CorpusCommand, InstructCommand, StatsCommand};

/// Shared state for one invocation.
pub struct Ctx {
    pub cfg: PipelineConfig,
    pub args: Vec<String>,
    pub exec: Exec,
}

impl Ctx {
    /// Validate the effective config and open a manifest for `command`.
    pub fn begin(&self, command: &str) -> Result<Recorder> {
        self.cfg.validate()?;
        Ok(Recorder::start(command, &self.args, &self.cfg))
    }
}

/// Print one JSON summary line on stdout.
pub fn emit<T: Serialize>(summary: &T) -> Result<()> {
    println!("{}", serde_json::to_string(summary)?);
    Ok(())
}

pub fn run(cli: Cli, args: Vec<String>) -> Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let mut ctx = Ctx { cfg, args, exec };
    match cli.command {
        Command::ExtractPdf(a) => pipeline::extract_pdf(&mut ctx, a),
        Command::Harvest(a) => pipeline::harvest(&mut ctx, a),
        Command::Refine(a) => pipeline::refine(&mut ctx, a),
        Command::Corpus(c) => match c {
            CorpusCommand::Add { store, from, records } => corpus::add(&ctx, &store, &from, &records),
            CorpusCommand::Split { store, ratio, seed } => corpus::split(&mut ctx, &store, ratio, seed),
            CorpusCommand::Export { store, out, name } => corpus::export(&ctx, &store, &out, &name),
            CorpusCommand::Stats { store } => corpus::stats(&ctx, &store),
            CorpusCommand::Render { dataset, family, out } => corpus::render(&ctx, &dataset, &family, &out),
        },
        Command::Stats(c) => match c {
            StatsCommand::Tokens { dataset, adapter, bins, out } => analysis::tokens(&mut ctx, &dataset, adapter, bins, &out),
            StatsCommand::Resolutions { dataset, bins, out } => analysis::resolutions(&mut ctx, &dataset, bins, &out),
        },
        Command::Instruct(c) => match c {
            InstructCommand::Build { input, store, threshold } => analysis::instruct_build(&mut ctx, &input, &store, threshold),
            InstructCommand::Eval {
                dataset,
                responses,
                out,
                split,
            } => analysis::instruct_eval(&ctx, &dataset, &responses, &out, split.as_deref()),
        },
        Command::MoeDemo(a) => model::moe_demo(&mut ctx, a),
        Command::MergePlan(a) => model::merge_plan(&ctx, a),
    }
}

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use vlcorpus::corpus::{self, render_chat, ChatFamily, CorpusRecord, ExportError, SplitCounts, Store};
use vlcorpus::refine::{RefineResult, RESULTS_FILE};
use vlcorpus::util::{read_jsonl, write_jsonl};

use super::pipeline::{CaptionSource, REFINE_INPUTS_FILE};
use super::{emit, Ctx};
use crate::failure::Failure;

/// Records for every refined caption in a refine output directory.
/// Returns `(records, pending, stale)`: unrefined items, and items whose image changed.
fn refined_records(store: &Store, dir: &Path) -> Result<(Vec<CorpusRecord>, usize, usize)> {
    let inputs_path = dir.join(REFINE_INPUTS_FILE);
    if !inputs_path.is_file() {
        return Err(Failure::input(format!("{} is not a refine output directory", dir.display())).into());
    }
    let sources: Vec<CaptionSource> = read_jsonl(&inputs_path)?;
    let results: HashMap<String, RefineResult> = read_jsonl::<RefineResult>(&dir.join(RESULTS_FILE))?
        .into_iter()
        .map(|r| (r.record_id.clone(), r))
        .collect();
    let (mut records, mut pending, mut stale) = (Vec::new(), 0, 0);
    for src in sources {
        let Some(result) = results.get(&src.record_id) else {
            pending += 1;
            continue;
        };
        let bytes = fs::read(&src.image_path).with_context(|| src.image_path.display().to_string())?;
        let (hash, _) = store.put_image(&bytes, &src.ext)?;
        let mut r = CorpusRecord::with_image(src.source, &hash, &src.ext, src.query.clone(), result.refined_text.trim());
        if r.id != src.record_id {
            log::warn!("{}: image changed since refinement; skipped", src.image_path.display());
            stale += 1;
            continue;
        }
        r.image_url = src.image_url;
        r.article_url = src.article_url;
        r.original_caption = Some(src.original_caption);
        records.push(r);
    }
    Ok((records, pending, stale))
}

pub fn add(ctx: &Ctx, store_dir: &Path, from: &[PathBuf], files: &[PathBuf]) -> Result<()> {
    if from.is_empty() && files.is_empty() {
        return Err(Failure::input("nothing to add: pass --from and/or --records").into());
    }
    let mut rec = ctx.begin("corpus-add")?;
    let store = Store::open(store_dir)?;
    let (mut records, mut pending, mut stale) = (Vec::new(), 0, 0);
    for dir in from {
        rec.input(dir)?;
        let (r, p, s) = refined_records(&store, dir)?;
        records.extend(r);
        pending += p;
        stale += s;
    }
    for f in files {
        rec.input(f)?;
        records.extend(read_jsonl::<CorpusRecord>(f)?);
    }
    let report = store.add_records(records)?;
    rec.finish(store.root())?;
    emit(&serde_json::json!({
        "added": report.added,
        "duplicate": report.duplicate,
        "rejected": report.rejected.iter().map(|(id, why)| serde_json::json!({"id": id, "reason": why})).collect::<Vec<_>>(),
        "pending": pending,
        "stale": stale,
    }))
}

pub fn split(ctx: &mut Ctx, store_dir: &Path, ratio: Option<f64>, seed: Option<u64>) -> Result<()> {
    if let Some(r) = ratio {
        ctx.cfg.split.ratio = r;
    }
    if let Some(s) = seed {
        ctx.cfg.seed = s;
    }
    let mut rec = ctx.begin("corpus-split")?;
    let store = Store::open(store_dir)?;
    rec.input(&store.root().join("records.jsonl"))?;
    let counts = store.assign_splits(ctx.cfg.split.ratio, ctx.cfg.seed)?;
    rec.finish(store.root())?;
    emit(&counts)
}

pub fn export(ctx: &Ctx, store_dir: &Path, out: &Path, name: &str) -> Result<()> {
    let mut rec = ctx.begin("corpus-export")?;
    let store = Store::open(store_dir)?;
    rec.input(&store.root().join("records.jsonl"))?;
    rec.input(&store.root().join("splits.json"))?;
    let summary = corpus::export(&store, name, out).map_err(|e| match e {
        ExportError::Unassigned(n) => anyhow::Error::new(Failure::input(format!("{n} records have no split; run `corpus split` first"))),
        other => anyhow::Error::new(other),
    })?;
    rec.finish(out)?;
    emit(&serde_json::json!({
        "records": summary.manifest.record_count,
        "split_counts": summary.manifest.split_counts,
        "failures": summary.failures.len(),
    }))
}

#[derive(Serialize)]
struct StoreStats {
    records: usize,
    by_source: BTreeMap<&'static str, usize>,
    splits: SplitCounts,
}

pub fn stats(ctx: &Ctx, store_dir: &Path) -> Result<()> {
    let mut rec = ctx.begin("corpus-stats")?;
    let store = Store::open(store_dir)?;
    rec.input(&store.root().join("records.jsonl"))?;
    let records = store.records()?;
    let mut by_source = BTreeMap::new();
    for r in &records {
        *by_source.entry(r.source.as_str()).or_insert(0) += 1;
    }
    rec.finish(store.root())?;
    emit(&StoreStats {
        records: records.len(),
        by_source,
        splits: SplitCounts::tally(&records),
    })
}

pub fn render(ctx: &Ctx, dataset: &Path, family: &str, out: &Path) -> Result<()> {
    let family: ChatFamily = family.parse().map_err(Failure::input)?;
    let mut rec = ctx.begin("corpus-render")?;
    rec.input(dataset)?;
    let data = corpus::import(dataset)?;
    let texts = render_chat(&data.records, family);
    let lines: Vec<_> = data
        .records
        .iter()
        .zip(&texts)
        .map(|(r, text)| serde_json::json!({"id": r.id, "split": r.split, "text": text}))
        .collect();
    fs::create_dir_all(out)?;
    write_jsonl(&out.join(format!("chat_{}.jsonl", family.as_str())), &lines)?;
    rec.finish(out)?;
    emit(&serde_json::json!({"records": lines.len(), "family": family.as_str()}))
}

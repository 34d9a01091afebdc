use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use vlcorpus::corpus::{record_id, Source};
use vlcorpus::pdf_figures::{extract_documents, load_exclusion_list, write_sidecar, PairLine};
use vlcorpus::refine::{refine_batch, RefineClient, RefineItem, TemplateFile, TemplateId, Validation};
use vlcorpus::util::{read_jsonl, sha256_hex, write_jsonl};
use vlcorpus::wiki_harvest::{self, default_keywords, parse_keywords, WikiClient, WikiImageRecord, RECORDS_FILE};

use super::{emit, Ctx};
use crate::failure::{Failure, Kind};
use crate::{ExtractArgs, HarvestArgs, RefineArgs};

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const REFINE_INPUTS_FILE: &str = "refine_inputs.jsonl";

/// One line of `documents.jsonl` written by `extract-pdf`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub doc_id: String,
    pub path: PathBuf,
    pub sha256: String,
    pub pairs: usize,
    pub rejects: usize,
    pub issues: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A captioned image awaiting refinement, with everything needed to build its record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionSource {
    pub record_id: String,
    pub source: Source,
    pub image_path: PathBuf,
    pub ext: String,
    pub original_caption: String,
    pub query: String,
    pub image_url: Option<String>,
    pub article_url: Option<String>,
}

fn pdf_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        return Err(Failure::input(format!("{} is neither a file nor a directory", input.display())).into());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pdf")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn extract_pdf(ctx: &mut Ctx, a: ExtractArgs) -> Result<()> {
    if let Some(p) = a.exclusion_list {
        ctx.cfg.exclusion_list = Some(p);
    }
    if let Some(v) = a.min_px {
        ctx.cfg.extract.filter.min_px = v;
    }
    if let Some(v) = a.max_aspect {
        ctx.cfg.extract.filter.max_aspect = v;
    }
    let mut rec = ctx.begin("extract-pdf")?;
    let mut policy = ctx.cfg.extract.clone();
    if let Some(p) = &ctx.cfg.exclusion_list {
        policy.filter.exclusion.extend(load_exclusion_list(p)?);
        rec.input(p)?;
    }
    let files = pdf_inputs(&a.input)?;
    if files.is_empty() {
        return Err(Failure::input(format!("no PDF files under {}", a.input.display())).into());
    }
    let mut docs = Vec::with_capacity(files.len());
    for f in &files {
        let id = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        docs.push((id, fs::read(f).with_context(|| f.display().to_string())?));
        rec.input(f)?;
    }

    let results = extract_documents(&docs, &policy, ctx.exec);
    fs::create_dir_all(&a.out)?;
    let mut entries = Vec::with_capacity(docs.len());
    for ((path, (doc_id, bytes)), result) in files.iter().zip(&docs).zip(results) {
        let mut entry = DocumentEntry {
            doc_id: doc_id.clone(),
            path: fs::canonicalize(path)?,
            sha256: sha256_hex(bytes),
            pairs: 0,
            rejects: 0,
            issues: 0,
            error: None,
        };
        match result {
            Ok(extraction) => {
                let (_, lines) = write_sidecar(&extraction, &a.out)?;
                entry.pairs = lines.len();
                entry.rejects = extraction.rejects.len();
                entry.issues = extraction.issues.len();
            }
            Err(e) => {
                log::warn!("{e}");
                entry.error = Some(e.to_string());
            }
        }
        entries.push(entry);
    }
    write_jsonl(&a.out.join(DOCUMENTS_FILE), &entries)?;
    rec.finish(&a.out)?;
    let failed = entries.iter().filter(|e| e.error.is_some()).count();
    if failed == entries.len() {
        return Err(Failure::input("no input document could be parsed").into());
    }
    emit(&serde_json::json!({
        "documents": entries.len(),
        "failed": failed,
        "pairs": entries.iter().map(|e| e.pairs).sum::<usize>(),
        "rejects": entries.iter().map(|e| e.rejects).sum::<usize>(),
    }))
}

pub fn harvest(ctx: &mut Ctx, a: HarvestArgs) -> Result<()> {
    if let Some(p) = a.keywords {
        ctx.cfg.keywords = Some(p);
    }
    if let Some(v) = a.limit {
        ctx.cfg.wiki.limit = v;
    }
    if let Some(v) = a.site {
        ctx.cfg.wiki.site = v;
    }
    if let Some(v) = a.workers {
        ctx.cfg.wiki.workers = v;
    }
    if let Some(v) = a.host_spacing_ms {
        ctx.cfg.wiki.host_spacing_ms = v;
    }
    let mut rec = ctx.begin("harvest")?;
    let keywords = match &ctx.cfg.keywords {
        Some(p) => {
            rec.input(p)?;
            parse_keywords(&fs::read_to_string(p)?)
        }
        None => default_keywords(),
    };
    let client = WikiClient::new(ctx.cfg.wiki.clone()).map_err(|e| Failure::new(Kind::Config, e.to_string()))?;
    let report = wiki_harvest::harvest(&client, &keywords, ctx.cfg.wiki.limit, &a.out).map_err(|e| match e {
        wiki_harvest::HarvestError::Http(_) => Failure::new(Kind::Network, e.to_string()),
        wiki_harvest::HarvestError::Io(_) => Failure::new(Kind::Io, e.to_string()),
        other => Failure::input(other.to_string()),
    })?;
    rec.finish(&a.out)?;
    if report.records.is_empty() {
        if let Some(first) = report.issues.first() {
            return Err(Failure::new(
                Kind::Network,
                format!("no images harvested; {} issues, first: {} {}: {}", report.issues.len(), first.stage, first.subject, first.message),
            )
            .into());
        }
    }
    emit(&serde_json::json!({
        "keywords": keywords.len(),
        "records": report.records.len(),
        "added": report.added,
        "issues": report.issues.len(),
    }))
}

fn ext_of(path: &Path) -> String {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_else(|| "png".into())
}

fn wiki_sources(dir: &Path, query: &str) -> Result<Vec<CaptionSource>> {
    let records: Vec<WikiImageRecord> = read_jsonl(&dir.join(RECORDS_FILE))?;
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let image_path = fs::canonicalize(dir.join(&r.image_ref)).with_context(|| format!("{}: {}", dir.display(), r.image_ref))?;
        let hash = sha256_hex(&fs::read(&image_path)?);
        out.push(CaptionSource {
            record_id: record_id(Source::Wikipedia, &hash, query),
            source: Source::Wikipedia,
            ext: ext_of(&image_path),
            image_path,
            original_caption: r.original_caption,
            query: query.to_string(),
            image_url: Some(r.image_url),
            article_url: Some(r.article_url),
        });
    }
    Ok(out)
}

fn pdf_sources(dir: &Path, query: &str) -> Result<Vec<CaptionSource>> {
    let docs: Vec<DocumentEntry> = read_jsonl(&dir.join(DOCUMENTS_FILE))?;
    let mut out = Vec::new();
    for doc in docs.iter().filter(|d| d.error.is_none()) {
        let doc_url = url::Url::from_file_path(&doc.path).map_err(|_| Failure::input(format!("bad document path {}", doc.path.display())))?;
        let lines: Vec<PairLine> = read_jsonl(&dir.join(format!("{}.pairs.jsonl", doc.doc_id)))?;
        for line in lines {
            let image_path = fs::canonicalize(dir.join(&line.image_path))?;
            let hash = sha256_hex(&fs::read(&image_path)?);
            let mut article = doc_url.clone();
            article.set_fragment(Some(&format!("page={}", line.page)));
            out.push(CaptionSource {
                record_id: record_id(Source::PaperPdf, &hash, query),
                source: Source::PaperPdf,
                ext: ext_of(&image_path),
                image_path,
                original_caption: line.caption,
                query: query.to_string(),
                image_url: None,
                article_url: Some(article.to_string()),
            });
        }
    }
    Ok(out)
}

/// Captioned images found in harvest and extraction output directories, first occurrence
/// of each record id kept.
pub fn caption_sources(dirs: &[PathBuf], query: &str) -> Result<Vec<CaptionSource>> {
    let mut all = Vec::new();
    for dir in dirs {
        if dir.join(RECORDS_FILE).is_file() {
            all.extend(wiki_sources(dir, query)?);
        } else if dir.join(DOCUMENTS_FILE).is_file() {
            all.extend(pdf_sources(dir, query)?);
        } else {
            return Err(Failure::input(format!(
                "{} holds neither {RECORDS_FILE} nor {DOCUMENTS_FILE}",
                dir.display()
            ))
            .into());
        }
    }
    let mut seen = HashSet::new();
    all.retain(|s| seen.insert(s.record_id.clone()));
    Ok(all)
}

pub fn refine(ctx: &mut Ctx, a: RefineArgs) -> Result<()> {
    if let Some(v) = a.endpoint {
        ctx.cfg.endpoint.base_url = v;
    }
    if let Some(v) = a.model {
        ctx.cfg.endpoint.model_name = v;
    }
    if let Some(v) = a.template {
        ctx.cfg.template = v.parse::<TemplateId>().map_err(Failure::input)?;
    }
    if let Some(v) = a.max_in_flight {
        ctx.cfg.endpoint.max_in_flight = v;
    }
    if let Some(v) = a.api_key_env {
        ctx.cfg.endpoint.api_key_env = Some(v);
    }
    let mut rec = ctx.begin("refine")?;
    for dir in &a.inputs {
        rec.input(dir)?;
    }
    let sources = caption_sources(&a.inputs, &ctx.cfg.query)?;
    fs::create_dir_all(&a.out)?;
    write_jsonl(&a.out.join(REFINE_INPUTS_FILE), &sources)?;

    let templates = TemplateFile::shipped();
    let template = templates.get(ctx.cfg.template).map_err(|e| Failure::new(Kind::Config, e.to_string()))?;
    let client = RefineClient::new(ctx.cfg.endpoint.clone()).map_err(|e| Failure::new(Kind::Config, e.to_string()))?;
    let items: Vec<RefineItem> = sources
        .iter()
        .map(|s| RefineItem {
            record_id: s.record_id.clone(),
            image_path: s.image_path.clone(),
            caption: s.original_caption.clone(),
        })
        .collect();
    let report = refine_batch(&client, &items, template, &a.out)?;
    rec.finish(&a.out)?;

    let refined = report.refined().count();
    let warned = report.refined().filter(|r| matches!(r.validation, Validation::Warn(_))).count();
    let failed: Vec<_> = report.failures().collect();
    if !items.is_empty() && refined == 0 {
        return Err(Failure::new(Kind::Network, format!("no caption refined; first failure: {}", failed[0].message)).into());
    }
    emit(&serde_json::json!({
        "items": items.len(),
        "calls": report.calls,
        "reused": report.reused,
        "refined": refined,
        "warned": warned,
        "failed": failed.len(),
    }))
}

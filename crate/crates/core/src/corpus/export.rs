use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::store::{SplitCounts, Store, StoreError};
use super::{CorpusRecord, Split};
use crate::util::{read_jsonl, write_jsonl};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0} records have no split; run the split step first")]
    Unassigned(usize),
    #[error("manifest counts {manifest:?} disagree with files {files:?}")]
    CountMismatch { manifest: SplitCounts, files: SplitCounts },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub record_count: usize,
    pub split_counts: SplitCounts,
    pub seed: u64,
    pub ratio: f64,
    pub created_at: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportFailure {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ExportSummary {
    pub manifest: DatasetManifest,
    pub failures: Vec<ExportFailure>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedDataset {
    pub manifest: DatasetManifest,
    /// Sorted by id.
    pub records: Vec<CorpusRecord>,
}

const SPLITS: [Split; 2] = [Split::Train, Split::Test];

fn split_file(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.jsonl", split.as_str()))
}

/// Write `train.jsonl`, `test.jsonl`, `images/`, `errors.jsonl` and `manifest.json`.
/// Records whose image is missing are left out and listed in `errors.jsonl`.
pub fn export(store: &Store, name: &str, out_dir: &Path) -> Result<ExportSummary, ExportError> {
    let mut records = store.records()?;
    let unassigned = records.iter().filter(|r| r.split == Split::Unassigned).count();
    if unassigned > 0 {
        return Err(ExportError::Unassigned(unassigned));
    }
    let split_meta = store.split_file()?.ok_or(ExportError::Unassigned(records.len()))?;
    records.sort_by(|a, b| a.id.cmp(&b.id));

    std::fs::create_dir_all(out_dir.join("images"))?;
    let mut failures = Vec::new();
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        if let (Some(src), Some(rel)) = (store.image_path(&r), r.image_ref.as_ref()) {
            if !src.is_file() {
                failures.push(ExportFailure {
                    id: r.id.clone(),
                    reason: format!("missing image {rel}"),
                });
                continue;
            }
            let dst = out_dir.join(rel);
            if !dst.exists() {
                std::fs::copy(&src, &dst)?;
            }
        }
        kept.push(r);
    }
    for split in SPLITS {
        let part: Vec<&CorpusRecord> = kept.iter().filter(|r| r.split == split).collect();
        write_jsonl(&split_file(out_dir, split), &part)?;
    }
    write_jsonl(&out_dir.join("errors.jsonl"), &failures)?;
    let manifest = DatasetManifest {
        name: name.to_string(),
        record_count: kept.len(),
        split_counts: SplitCounts::tally(&kept),
        seed: split_meta.seed,
        ratio: split_meta.ratio,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        tool_version: crate::TOOL_VERSION.to_string(),
    };
    std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(ExportSummary {
        manifest,
        failures,
        out_dir: out_dir.to_path_buf(),
    })
}

pub fn import(dir: &Path) -> Result<ImportedDataset, ExportError> {
    let manifest: DatasetManifest = serde_json::from_slice(&std::fs::read(dir.join("manifest.json"))?)?;
    let mut records = Vec::new();
    for split in SPLITS {
        records.extend(read_jsonl::<CorpusRecord>(&split_file(dir, split))?);
    }
    let files = SplitCounts::tally(&records);
    if files != manifest.split_counts || records.len() != manifest.record_count {
        return Err(ExportError::CountMismatch {
            manifest: manifest.split_counts,
            files,
        });
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(ImportedDataset { manifest, records })
}

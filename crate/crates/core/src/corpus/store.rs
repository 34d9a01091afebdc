use std::collections::{BTreeMap, HashSet};
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{image_ref_for, CorpusRecord, Split};
use crate::util::{read_jsonl, sha256_hex, JsonlAppender};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("split ratio must lie in (0, 1), got {0}")]
    Ratio(f64),
    #[error("store is empty")]
    Empty,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddReport {
    pub added: usize,
    pub duplicate: usize,
    /// `(record id, reason)` for records that failed validation.
    pub rejected: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub unassigned: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.test + self.unassigned
    }

    pub fn tally<'a>(records: impl IntoIterator<Item = &'a CorpusRecord>) -> Self {
        let mut c = SplitCounts::default();
        for r in records {
            match r.split {
                Split::Train => c.train += 1,
                Split::Test => c.test += 1,
                Split::Unassigned => c.unassigned += 1,
            }
        }
        c
    }
}

/// Persisted split assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub ratio: f64,
    pub seed: u64,
    pub assignments: BTreeMap<String, Split>,
}

/// On-disk corpus: `records.jsonl` (append-only), `images/`, `splits.json`.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(root.join("images"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn log_path(&self) -> PathBuf {
        self.root.join("records.jsonl")
    }

    fn splits_path(&self) -> PathBuf {
        self.root.join("splits.json")
    }

    /// Write image bytes under their content hash; returns `(hash, image_ref)`.
    pub fn put_image(&self, bytes: &[u8], ext: &str) -> io::Result<(String, String)> {
        let hash = sha256_hex(bytes);
        let rel = image_ref_for(&hash, ext);
        let path = self.root.join(&rel);
        if !path.exists() {
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, bytes)?;
            std::fs::rename(tmp, &path)?;
        }
        Ok((hash, rel))
    }

    pub fn image_path(&self, record: &CorpusRecord) -> Option<PathBuf> {
        record.image_ref.as_ref().map(|r| self.root.join(r))
    }

    pub fn split_file(&self) -> Result<Option<SplitFile>, StoreError> {
        match std::fs::read(self.splits_path()) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Logged records in insertion order, with their current split applied.
    pub fn records(&self) -> Result<Vec<CorpusRecord>, StoreError> {
        let mut records: Vec<CorpusRecord> = read_jsonl(&self.log_path())?;
        let splits = self.split_file()?.map(|s| s.assignments).unwrap_or_default();
        for r in &mut records {
            r.split = splits.get(&r.id).copied().unwrap_or(Split::Unassigned);
        }
        Ok(records)
    }

    /// Append valid, previously unseen records. Split fields on input are ignored.
    pub fn add_records(&self, records: impl IntoIterator<Item = CorpusRecord>) -> Result<AddReport, StoreError> {
        let mut seen: HashSet<String> = read_jsonl::<CorpusRecord>(&self.log_path())?.into_iter().map(|r| r.id).collect();
        let mut log = JsonlAppender::open(&self.log_path())?;
        let mut report = AddReport::default();
        for mut r in records {
            if let Err(reason) = r.validate() {
                report.rejected.push((r.id, reason));
                continue;
            }
            if !seen.insert(r.id.clone()) {
                report.duplicate += 1;
                continue;
            }
            r.split = Split::Unassigned;
            log.append(&r)?;
            report.added += 1;
        }
        Ok(report)
    }

    /// Seeded uniform split over all records: ids are sorted, shuffled with ChaCha8 and
    /// the first `round(ratio · N)` become train.
    pub fn assign_splits(&self, ratio: f64, seed: u64) -> Result<SplitCounts, StoreError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(StoreError::Ratio(ratio));
        }
        let mut ids: Vec<String> = read_jsonl::<CorpusRecord>(&self.log_path())?.into_iter().map(|r| r.id).collect();
        if ids.is_empty() {
            return Err(StoreError::Empty);
        }
        ids.sort();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (ratio * ids.len() as f64).round() as usize;
        let assignments: BTreeMap<String, Split> = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, if i < n_train { Split::Train } else { Split::Test }))
            .collect();
        let counts = SplitCounts {
            train: n_train,
            test: assignments.len() - n_train,
            unassigned: 0,
        };
        let file = SplitFile { ratio, seed, assignments };
        std::fs::write(self.splits_path(), serde_json::to_string_pretty(&file)? + "\n")?;
        Ok(counts)
    }
}

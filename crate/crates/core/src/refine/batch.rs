use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::client::{refine_caption, RefineClient, RefineFailure, RefineResult, Validation};
use super::{build_prompt, RefineTemplate};
use crate::util::{read_jsonl, write_jsonl, JsonlAppender};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineItem {
    pub record_id: String,
    pub image_path: PathBuf,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RefineOutcome {
    Refined(RefineResult),
    Failed(RefineFailure),
}

impl RefineOutcome {
    pub fn record_id(&self) -> &str {
        match self {
            RefineOutcome::Refined(r) => &r.record_id,
            RefineOutcome::Failed(f) => &f.record_id,
        }
    }
}

/// One line of `manifest.jsonl`, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record_id: String,
    /// `pass`, `warn` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub calls: usize,
    pub reused: usize,
    pub outcomes: Vec<RefineOutcome>,
}

impl BatchReport {
    pub fn refined(&self) -> impl Iterator<Item = &RefineResult> {
        self.outcomes.iter().filter_map(|o| match o {
            RefineOutcome::Refined(r) => Some(r),
            RefineOutcome::Failed(_) => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &RefineFailure> {
        self.outcomes.iter().filter_map(|o| match o {
            RefineOutcome::Failed(f) => Some(f),
            RefineOutcome::Refined(_) => None,
        })
    }
}

pub const RESULTS_FILE: &str = "refined.jsonl";

fn process(client: &RefineClient, template: &RefineTemplate, item: &RefineItem) -> RefineOutcome {
    let fail = |message: String| {
        RefineOutcome::Failed(RefineFailure {
            record_id: item.record_id.clone(),
            message,
        })
    };
    let prompt = match build_prompt(template, &item.caption) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let bytes = match std::fs::read(&item.image_path) {
        Ok(b) => b,
        Err(e) => return fail(format!("{}: {e}", item.image_path.display())),
    };
    match refine_caption(client, &item.record_id, template, &bytes, &prompt) {
        Ok(r) => {
            if let Validation::Warn(reason) = &r.validation {
                log::warn!("{}: response failed the {reason} check", r.record_id);
            }
            RefineOutcome::Refined(r)
        }
        Err(f) => RefineOutcome::Failed(f),
    }
}

/// Refine every item not already refined in `out_dir`, with at most
/// `max_in_flight` concurrent requests. Successful results are appended to
/// `refined.jsonl` as they arrive; `failures.jsonl` and `manifest.jsonl` are rewritten
/// at the end, the manifest in input order.
pub fn refine_batch(client: &RefineClient, items: &[RefineItem], template: &RefineTemplate, out_dir: &Path) -> io::Result<BatchReport> {
    std::fs::create_dir_all(out_dir)?;
    let results_path = out_dir.join(RESULTS_FILE);
    let done: HashMap<String, RefineResult> = read_jsonl::<RefineResult>(&results_path)?
        .into_iter()
        .map(|r| (r.record_id.clone(), r))
        .collect();
    let pending: Vec<usize> = (0..items.len()).filter(|&i| !done.contains_key(&items[i].record_id)).collect();
    let workers = client.config().max_in_flight.max(1).min(pending.len().max(1));

    let mut fresh: HashMap<usize, RefineOutcome> = HashMap::new();
    let mut log = JsonlAppender::open(&results_path)?;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, RefineOutcome)>();
    std::thread::scope(|s| -> io::Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            s.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = pending.get(k) else { break };
                if tx.send((i, process(client, template, &items[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, outcome) in rx {
            if let RefineOutcome::Refined(r) = &outcome {
                log.append(r)?;
            }
            fresh.insert(i, outcome);
        }
        Ok(())
    })?;

    let outcomes: Vec<RefineOutcome> = items
        .iter()
        .enumerate()
        .map(|(i, item)| match fresh.remove(&i) {
            Some(o) => o,
            None => RefineOutcome::Refined(done[&item.record_id].clone()),
        })
        .collect();
    let manifest: Vec<ManifestEntry> = outcomes
        .iter()
        .map(|o| match o {
            RefineOutcome::Refined(r) => ManifestEntry {
                record_id: r.record_id.clone(),
                status: match &r.validation {
                    Validation::Pass => "pass".into(),
                    Validation::Warn(_) => "warn".into(),
                },
                detail: match &r.validation {
                    Validation::Warn(reason) => Some(reason.clone()),
                    Validation::Pass => None,
                },
            },
            RefineOutcome::Failed(f) => ManifestEntry {
                record_id: f.record_id.clone(),
                status: "failed".into(),
                detail: Some(f.message.clone()),
            },
        })
        .collect();
    write_jsonl(&out_dir.join("manifest.jsonl"), &manifest)?;
    let failures: Vec<&RefineFailure> = outcomes
        .iter()
        .filter_map(|o| match o {
            RefineOutcome::Failed(f) => Some(f),
            _ => None,
        })
        .collect();
    write_jsonl(&out_dir.join("failures.jsonl"), &failures)?;
    Ok(BatchReport {
        calls: pending.len(),
        reused: items.len() - pending.len(),
        outcomes,
    })
}

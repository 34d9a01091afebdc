//! Corpus statistics: token-count histograms per text field and image resolution
//! histograms per axis, written as plot-ready CSV.

mod histogram;
mod tokenizer;

pub use histogram::{uniform_edges, BinSpec, Histogram, HistogramError};
pub use tokenizer::{TokenizerAdapter, TokenizerError};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusRecord;
use crate::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextField {
    Question,
    Answer,
    Combined,
}

impl TextField {
    pub const ALL: [TextField; 3] = [TextField::Question, TextField::Answer, TextField::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            TextField::Question => "question",
            TextField::Answer => "answer",
            TextField::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// Per-record token count. Multi-turn records count all their turns' text for the field.
pub fn record_tokens(record: &CorpusRecord, field: TextField, adapter: &TokenizerAdapter) -> usize {
    let side = |answer: bool| {
        let joined: Vec<&str> = record.turns().map(|(q, a)| if answer { a } else { q }).collect();
        adapter.count_tokens(&joined.join("\n"))
    };
    match field {
        TextField::Question => side(false),
        TextField::Answer => side(true),
        TextField::Combined => side(false) + side(true),
    }
}

fn fill(values: &[f64], bins: &BinSpec, exec: Exec) -> Result<Histogram, HistogramError> {
    let base = Histogram::with_edges(bins.edges_for(values)?)?;
    Ok(exec.fold(
        values,
        || base.empty_like(),
        |mut h, v| {
            h.add(*v);
            h
        },
        |a, b| a.merge(&b).expect("partials share edges"),
    ))
}

pub fn token_histogram(
    records: &[CorpusRecord],
    field: TextField,
    adapter: &TokenizerAdapter,
    bins: &BinSpec,
    exec: Exec,
) -> Result<Histogram, HistogramError> {
    let values = exec.map(records, |r| record_tokens(r, field, adapter) as f64);
    fill(&values, bins, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionHistogram {
    pub histogram: Histogram,
    pub skipped: usize,
}

/// Reads each image's intrinsic size. Files that cannot be decoded are skipped and tallied.
pub fn image_dimensions(path: &Path) -> Option<(u32, u32)> {
    image::ImageReader::open(path)
        .ok()?
        .with_guessed_format()
        .ok()?
        .decode()
        .ok()
        .map(|img| (img.width(), img.height()))
}

pub fn resolution_histogram_from_dims(dims: &[Option<(u32, u32)>], axis: Axis, bins: &BinSpec, exec: Exec) -> Result<ResolutionHistogram, HistogramError> {
    let values: Vec<f64> = dims
        .iter()
        .flatten()
        .map(|&(w, h)| match axis {
            Axis::X => w as f64,
            Axis::Y => h as f64,
        })
        .collect();
    Ok(ResolutionHistogram {
        histogram: fill(&values, bins, exec)?,
        skipped: dims.iter().filter(|d| d.is_none()).count(),
    })
}

pub fn resolution_histogram(images: &[PathBuf], axis: Axis, bins: &BinSpec, exec: Exec) -> Result<ResolutionHistogram, HistogramError> {
    let dims = exec.map(images, |p| image_dimensions(p));
    resolution_histogram_from_dims(&dims, axis, bins, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub tokenizer: String,
    pub records: usize,
    pub images: usize,
    pub images_skipped: usize,
    pub files: Vec<String>,
    pub token_means: Vec<(String, f64)>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Histogram CSVs for an exported corpus: `tokens_{question,answer,combined}.csv`,
/// `resolution_{x,y}.csv`, plus `summary.json`. Image paths are resolved against `corpus_dir`.
pub fn report(
    records: &[CorpusRecord],
    corpus_dir: &Path,
    adapter: &TokenizerAdapter,
    bins: &BinSpec,
    out: &Path,
    exec: Exec,
) -> Result<StatsSummary, ReportError> {
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut token_means = Vec::new();
    for field in TextField::ALL {
        let h = token_histogram(records, field, adapter, bins, exec)?;
        let name = format!("tokens_{}.csv", field.as_str());
        std::fs::write(out.join(&name), h.to_csv())?;
        files.push(name);
        let sum: usize = records.iter().map(|r| record_tokens(r, field, adapter)).sum();
        token_means.push((field.as_str().to_string(), if records.is_empty() { 0.0 } else { sum as f64 / records.len() as f64 }));
    }
    let images: Vec<PathBuf> = records.iter().filter_map(|r| r.image_ref.as_ref().map(|p| corpus_dir.join(p))).collect();
    let dims = exec.map(&images, |p| image_dimensions(p));
    let mut skipped = 0;
    for (axis, name) in [(Axis::X, "resolution_x.csv"), (Axis::Y, "resolution_y.csv")] {
        let r = resolution_histogram_from_dims(&dims, axis, bins, exec)?;
        skipped = r.skipped;
        std::fs::write(out.join(name), r.histogram.to_csv())?;
        files.push(name.to_string());
    }
    files.push("summary.json".into());
    let summary = StatsSummary {
        tokenizer: adapter.id(),
        records: records.len(),
        images: images.len(),
        images_skipped: skipped,
        files,
        token_means,
    };
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

//! Image-text record store: append-only JSONL log, content-addressed images, seeded
//! train/test split, per-split export and chat-template rendering.

mod chat;
mod export;
mod store;

pub use chat::{escape_payload, parse_chat, render_chat, render_record, unescape_payload, ChatFamily};
pub use export::{export, import, ExportError, ExportSummary, ImportedDataset};
pub use store::{AddReport, SplitCounts, SplitFile, Store, StoreError};

use serde::{Deserialize, Serialize};

use crate::util::sha256_parts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Wikipedia,
    PaperPdf,
    TextOnly,
    /// Rendered simulation frames paired with instruction answers.
    Simulation,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Wikipedia => "wikipedia",
            Source::PaperPdf => "paper_pdf",
            Source::TextOnly => "text_only",
            Source::Simulation => "simulation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub query: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub source: Source,
    /// `images/<sha256>.<ext>` relative to the store or export root.
    pub image_ref: Option<String>,
    pub image_url: Option<String>,
    pub article_url: Option<String>,
    pub original_caption: Option<String>,
    pub query: String,
    pub answer: String,
    #[serde(default)]
    pub split: Split,
    /// Further user/assistant exchanges after the first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_turns: Vec<Turn>,
    /// Instruction task name for mechanics records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
}

/// Record id: digest of source, content key (image hash, or answer text for text-only
/// records) and query.
pub fn record_id(source: Source, content_key: &str, query: &str) -> String {
    sha256_parts(&[source.as_str().as_bytes(), content_key.as_bytes(), query.as_bytes()])
}

pub fn image_ref_for(content_hash: &str, ext: &str) -> String {
    format!("images/{content_hash}.{ext}")
}

impl CorpusRecord {
    /// An image-backed record. `content_hash` is the SHA-256 hex of the image bytes.
    pub fn with_image(source: Source, content_hash: &str, ext: &str, query: impl Into<String>, answer: impl Into<String>) -> Self {
        let query = query.into();
        Self {
            id: record_id(source, content_hash, &query),
            source,
            image_ref: Some(image_ref_for(content_hash, ext)),
            image_url: None,
            article_url: None,
            original_caption: None,
            query,
            answer: answer.into(),
            split: Split::Unassigned,
            extra_turns: Vec::new(),
            task: None,
        }
    }

    pub fn text_only(query: impl Into<String>, answer: impl Into<String>) -> Self {
        let (query, answer) = (query.into(), answer.into());
        Self {
            id: record_id(Source::TextOnly, &answer, &query),
            source: Source::TextOnly,
            image_ref: None,
            image_url: None,
            article_url: None,
            original_caption: None,
            query,
            answer,
            split: Split::Unassigned,
            extra_turns: Vec::new(),
            task: None,
        }
    }

    /// Content hash encoded in `image_ref`, if any.
    pub fn image_hash(&self) -> Option<&str> {
        let name = self.image_ref.as_deref()?.rsplit('/').next()?;
        Some(name.split('.').next().unwrap_or(name))
    }

    pub fn expected_id(&self) -> String {
        let key = match self.source {
            Source::TextOnly => self.answer.as_str(),
            _ => self.image_hash().unwrap_or(""),
        };
        record_id(self.source, key, &self.query)
    }

    pub fn validate(&self) -> Result<(), String> {
        match (self.source, &self.image_ref) {
            (Source::TextOnly, Some(_)) => return Err("text_only record carries an image_ref".into()),
            (s, None) if s != Source::TextOnly => return Err(format!("{} record lacks an image_ref", s.as_str())),
            _ => {}
        }
        if let Some(r) = &self.image_ref {
            let hash = self.image_hash().unwrap_or("");
            if !r.starts_with("images/") || hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(format!("image_ref {r:?} is not content-addressed"));
            }
        }
        if self.query.trim().is_empty() {
            return Err("empty query".into());
        }
        if self.answer.trim().is_empty() {
            return Err("empty answer".into());
        }
        if self.extra_turns.iter().any(|t| t.query.trim().is_empty() || t.answer.trim().is_empty()) {
            return Err("empty follow-up turn".into());
        }
        if self.id != self.expected_id() {
            return Err("id does not match digest of (source, content, query)".into());
        }
        Ok(())
    }

    /// All exchanges in order, first turn included.
    pub fn turns(&self) -> impl Iterator<Item = (&str, &str)> {
        std::iter::once((self.query.as_str(), self.answer.as_str())).chain(self.extra_turns.iter().map(|t| (t.query.as_str(), t.answer.as_str())))
    }
}

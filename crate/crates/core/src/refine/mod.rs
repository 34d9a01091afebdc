//! Caption refinement through a vision-capable chat-completions endpoint.

mod batch;
mod client;

pub use batch::{refine_batch, BatchReport, ManifestEntry, RefineItem, RefineOutcome, RESULTS_FILE};
pub use client::{refine_caption, validate_opener, EndpointConfig, RefineClient, RefineFailure, RefineResult, Validation, ACCEPTED_OPENERS};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PLACEHOLDER: &str = "{caption}";

const SHIPPED: &str = include_str!("../../assets/refine_templates.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Wiki,
    PaperConcise,
    PaperReasoned,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Wiki => "wiki",
            TemplateId::PaperConcise => "paper_concise",
            TemplateId::PaperReasoned => "paper_reasoned",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wiki" => Ok(TemplateId::Wiki),
            "paper_concise" => Ok(TemplateId::PaperConcise),
            "paper_reasoned" => Ok(TemplateId::PaperReasoned),
            _ => Err(format!("unknown template {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineTemplate {
    pub id: TemplateId,
    pub system_text: String,
    /// Contains exactly one `{caption}`.
    pub user_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateFile {
    pub templates: Vec<RefineTemplate>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template file: {0}")]
    Parse(String),
    #[error("template {0} must contain exactly one {{caption}} placeholder")]
    Placeholder(TemplateId),
    #[error("template {0} not found")]
    Missing(TemplateId),
    #[error("caption is empty")]
    EmptyCaption,
}

impl TemplateFile {
    pub fn parse(json: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile = serde_json::from_str(json).map_err(|e| TemplateError::Parse(e.to_string()))?;
        for t in &file.templates {
            if t.user_text.matches(PLACEHOLDER).count() != 1 || t.system_text.contains(PLACEHOLDER) {
                return Err(TemplateError::Placeholder(t.id));
            }
        }
        Ok(file)
    }

    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("shipped template file is valid")
    }

    pub fn get(&self, id: TemplateId) -> Result<&RefineTemplate, TemplateError> {
        self.templates.iter().find(|t| t.id == id).ok_or(TemplateError::Missing(id))
    }
}

/// Backticks would close the ``` delimiters around the caption; they become apostrophes.
pub fn escape_caption(caption: &str) -> String {
    caption.replace('`', "'")
}

/// User prompt with the caption substituted. The template text is otherwise untouched.
pub fn build_prompt(template: &RefineTemplate, caption: &str) -> Result<String, TemplateError> {
    if caption.trim().is_empty() {
        return Err(TemplateError::EmptyCaption);
    }
    Ok(template.user_text.replacen(PLACEHOLDER, &escape_caption(caption), 1))
}

impl RefineTemplate {
    /// System and user text as one prompt, separated by a blank line.
    pub fn full_text(&self, caption: &str) -> Result<String, TemplateError> {
        Ok(format!("{}\n\n{}", self.system_text, build_prompt(self, caption)?))
    }
}

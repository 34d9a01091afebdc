use std::panic::{self, AssertUnwindSafe};

use lopdf::Document;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::filter::filter_image;
use super::matching::match_figures;
use super::parse::parse_page_layout;
use super::{ExtractPolicy, FigurePair, Rejected};
use crate::Exec;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{doc_id}: not a readable PDF: {message}")]
    Unparseable { doc_id: String, message: String },
}

/// Something that went wrong on one page without stopping the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageIssue {
    pub page_index: u32,
    pub message: String,
}

/// Result of processing one document. Every placed image lands in exactly one of
/// `pairs` or `rejects`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentExtraction {
    pub doc_id: String,
    pub page_count: u32,
    pub pairs: Vec<FigurePair>,
    pub rejects: Vec<Rejected>,
    pub issues: Vec<PageIssue>,
}

fn order_key(page: u32, bbox: &super::BBox) -> (u32, f64, f64) {
    (page, bbox.y0, bbox.x0)
}

/// Runs the full per-page pipeline over a PDF held in memory.
///
/// Output order is (page, image top, image left); ties keep content-stream order.
pub fn extract_document(doc_id: &str, pdf_bytes: &[u8], policy: &ExtractPolicy) -> Result<DocumentExtraction, ExtractError> {
    let doc = Document::load_mem(pdf_bytes).map_err(|e| ExtractError::Unparseable {
        doc_id: doc_id.to_string(),
        message: e.to_string(),
    })?;
    let pages = doc.get_pages();
    let mut out = DocumentExtraction {
        doc_id: doc_id.to_string(),
        page_count: pages.len() as u32,
        pairs: Vec::new(),
        rejects: Vec::new(),
        issues: Vec::new(),
    };

    for (page_no, page_id) in pages {
        let page_index = page_no - 1;
        let result = panic::catch_unwind(AssertUnwindSafe(|| parse_page_layout(&doc, page_id, page_index)));
        let (layout, notes) = match result {
            Ok(Ok(v)) => v,
            Ok(Err(message)) => {
                out.issues.push(PageIssue { page_index, message });
                continue;
            }
            Err(_) => {
                out.issues.push(PageIssue {
                    page_index,
                    message: "page interpretation panicked".into(),
                });
                continue;
            }
        };
        out.issues
            .extend(notes.into_iter().map(|message| PageIssue { page_index, message }));

        let mut usable = Vec::new();
        for image in layout.images {
            match filter_image(&image, &policy.filter) {
                Ok(accepted) => usable.push(accepted),
                Err(reason) => out.rejects.push(Rejected { image, reason }),
            }
        }
        let (pairs, rejected) = match_figures(doc_id, usable, &layout.blocks, policy);
        out.pairs.extend(pairs);
        out.rejects.extend(rejected);
    }

    out.pairs.sort_by(|a, b| {
        order_key(a.image.page_index, &a.image.bbox)
            .partial_cmp(&order_key(b.image.page_index, &b.image.bbox))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out.rejects.sort_by(|a, b| {
        order_key(a.image.page_index, &a.image.bbox)
            .partial_cmp(&order_key(b.image.page_index, &b.image.bbox))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// Processes independent documents, one per task.
pub fn extract_documents(
    docs: &[(String, Vec<u8>)],
    policy: &ExtractPolicy,
    exec: Exec,
) -> Vec<Result<DocumentExtraction, ExtractError>> {
    exec.map(docs, |(id, bytes)| extract_document(id, bytes, policy))
}

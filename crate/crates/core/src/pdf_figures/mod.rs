//! Figure/caption pairing for PDF documents.
//!
//! Each page is reduced to caption-like text blocks and placed images. Images pass an
//! exclusion/shape filter, then each one is paired with the nearest caption block that
//! starts below it on the same page (see [`caption_distance`]).

mod extract;
mod filter;
mod geometry;
mod images;
mod matching;
mod parse;
mod sidecar;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use extract::{extract_document, extract_documents, DocumentExtraction, ExtractError, PageIssue};
pub use filter::{filter_image, load_exclusion_list, FilterPolicy};
pub use geometry::{
    caption_distance, caption_distance_with_tolerance, BBox, PageGeometry, DEFAULT_BELOW_TOLERANCE,
};
pub use images::{pixel_hash, ColorModel};
pub use matching::match_figures;
pub use parse::{parse_page_layout, PageLayout, DEFAULT_ASCENT};
pub use sidecar::{write_sidecar, PairLine};

/// Prefixes that mark a text block as a figure caption.
pub const DEFAULT_CAPTION_PREFIXES: [&str; 2] = ["fig", "figure"];

/// A block of text on one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub text: String,
    pub bbox: BBox,
    pub page_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Jpeg,
}

/// Why an image could not be decoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeIssue {
    pub unsupported_colorspace: bool,
    pub detail: String,
}

/// An image placed on a page.
///
/// `bytes` holds the encoded image: the JPEG stream as stored in the PDF, or a PNG
/// re-encoding of raw samples. `decode_issue` is set when the samples could not be turned
/// into pixels; such images carry zero dimensions and an empty hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedImage {
    #[serde(skip)]
    pub bytes: Vec<u8>,
    pub format: ImageFormat,
    pub bbox: BBox,
    pub page_index: u32,
    pub intrinsic_width_px: u32,
    pub intrinsic_height_px: u32,
    pub content_hash: String,
    pub color: ColorModel,
    pub decode_issue: Option<DecodeIssue>,
}

/// An image matched to its caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigurePair {
    pub doc_id: String,
    pub image: ExtractedImage,
    pub caption: TextBlock,
    pub distance: f64,
    /// Another image on the page picked the same caption.
    pub shared_caption: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCode {
    InExclusionList,
    ExtremeAspectRatio,
    TooSmall,
    Undecodable,
    UnsupportedColorspace,
    NoCaptionFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectReason {
    pub code: RejectCode,
    pub detail: String,
}

impl RejectReason {
    pub fn new(code: RejectCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    pub image: ExtractedImage,
    pub reason: RejectReason,
}

/// Extraction settings: caption detection, the "below" slack and the image filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractPolicy {
    pub caption_prefixes: Vec<String>,
    pub below_tolerance: f64,
    pub filter: FilterPolicy,
}

impl Default for ExtractPolicy {
    fn default() -> Self {
        Self {
            caption_prefixes: DEFAULT_CAPTION_PREFIXES.iter().map(|s| s.to_string()).collect(),
            below_tolerance: DEFAULT_BELOW_TOLERANCE,
            filter: FilterPolicy::default(),
        }
    }
}

/// True when `text` starts (case-insensitively) with `fig` or `figure`.
pub fn is_caption_block(text: &str) -> bool {
    is_caption_block_with(text, &DEFAULT_CAPTION_PREFIXES)
}

pub fn is_caption_block_with<S: AsRef<str>>(text: &str, prefixes: &[S]) -> bool {
    let head = text.trim_start();
    prefixes.iter().any(|p| {
        let p = p.as_ref();
        head.len() >= p.len()
            && head.is_char_boundary(p.len())
            && head[..p.len()].eq_ignore_ascii_case(p)
    })
}

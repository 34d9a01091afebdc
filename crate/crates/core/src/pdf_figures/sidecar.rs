use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::images::{encode_png, flatten_rgb};
use super::{BBox, DocumentExtraction, RejectCode};
use crate::util::write_jsonl;

/// One line of the `<doc_id>.pairs.jsonl` sidecar. `page` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLine {
    pub doc_id: String,
    pub page: u32,
    pub image_path: String,
    pub caption: String,
    pub distance: f64,
    pub flags: Vec<String>,
    pub image_bbox: BBox,
    pub caption_bbox: BBox,
    pub width_px: u32,
    pub height_px: u32,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RejectLine {
    doc_id: String,
    page: u32,
    image_bbox: BBox,
    code: RejectCode,
    detail: String,
}

/// Writes the pair sidecar, a reject sidecar and one PNG per pair named
/// `<doc_id>_p<page>_<n>.png` (`n` counts pairs on the page from 1).
pub fn write_sidecar(extraction: &DocumentExtraction, out_dir: &Path) -> io::Result<(PathBuf, Vec<PairLine>)> {
    fs::create_dir_all(out_dir)?;
    let mut per_page: BTreeMap<u32, u32> = BTreeMap::new();
    let mut lines = Vec::with_capacity(extraction.pairs.len());
    for pair in &extraction.pairs {
        let page = pair.image.page_index + 1;
        let n = per_page.entry(page).or_default();
        *n += 1;
        let name = format!("{}_p{}_{}.png", extraction.doc_id, page, n);
        let decoded = image::load_from_memory(&pair.image.bytes).map_err(io::Error::other)?;
        let png = encode_png(&image::DynamicImage::ImageRgb8(flatten_rgb(&decoded))).map_err(io::Error::other)?;
        fs::write(out_dir.join(&name), png)?;
        let mut flags = Vec::new();
        if pair.shared_caption {
            flags.push("shared_caption".to_string());
        }
        lines.push(PairLine {
            doc_id: extraction.doc_id.clone(),
            page,
            image_path: name,
            caption: pair.caption.text.clone(),
            distance: pair.distance,
            flags,
            image_bbox: pair.image.bbox,
            caption_bbox: pair.caption.bbox,
            width_px: pair.image.intrinsic_width_px,
            height_px: pair.image.intrinsic_height_px,
            content_hash: pair.image.content_hash.clone(),
        });
    }
    let path = out_dir.join(format!("{}.pairs.jsonl", extraction.doc_id));
    write_jsonl(&path, &lines)?;
    let rejects: Vec<RejectLine> = extraction
        .rejects
        .iter()
        .map(|r| RejectLine {
            doc_id: extraction.doc_id.clone(),
            page: r.image.page_index + 1,
            image_bbox: r.image.bbox,
            code: r.reason.code,
            detail: r.reason.detail.clone(),
        })
        .collect();
    write_jsonl(&out_dir.join(format!("{}.rejects.jsonl", extraction.doc_id)), &rejects)?;
    Ok((path, lines))
}

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::images::{encode_png, flatten_rgb};
use super::{ColorModel, ExtractedImage, ImageFormat, RejectCode, RejectReason};

/// Image acceptance rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterPolicy {
    /// Reject when `max(w, h) / min(w, h)` exceeds this.
    pub max_aspect: f64,
    /// Reject when the shorter side is below this many pixels.
    pub min_px: u32,
    /// Pixel hashes of images to drop (journal logos and similar marks).
    pub exclusion: BTreeSet<String>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            max_aspect: 8.0,
            min_px: 64,
            exclusion: BTreeSet::new(),
        }
    }
}

/// Reads one hash per line; blank lines and `#` comments are ignored.
pub fn load_exclusion_list(path: &Path) -> io::Result<BTreeSet<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_ascii_lowercase())
        .collect())
}

/// Applies the policy. Accepted images come back re-encoded as RGB PNG.
pub fn filter_image(img: &ExtractedImage, policy: &FilterPolicy) -> Result<ExtractedImage, RejectReason> {
    if let Some(issue) = &img.decode_issue {
        let code = if issue.unsupported_colorspace {
            RejectCode::UnsupportedColorspace
        } else {
            RejectCode::Undecodable
        };
        return Err(RejectReason::new(code, issue.detail.clone()));
    }
    if policy.exclusion.contains(&img.content_hash) {
        return Err(RejectReason::new(RejectCode::InExclusionList, img.content_hash.clone()));
    }
    let (w, h) = (img.intrinsic_width_px, img.intrinsic_height_px);
    let (short, long) = (w.min(h), w.max(h));
    if short == 0 {
        return Err(RejectReason::new(RejectCode::Undecodable, "zero-sized image"));
    }
    let aspect = long as f64 / short as f64;
    if aspect > policy.max_aspect {
        return Err(RejectReason::new(
            RejectCode::ExtremeAspectRatio,
            format!("{w}x{h} aspect {aspect:.2} > {}", policy.max_aspect),
        ));
    }
    if short < policy.min_px {
        return Err(RejectReason::new(
            RejectCode::TooSmall,
            format!("{w}x{h} shorter side < {}", policy.min_px),
        ));
    }
    if img.format == ImageFormat::Png && img.color == ColorModel::Rgb {
        return Ok(img.clone());
    }
    let decoded = image::load_from_memory(&img.bytes)
        .map_err(|e| RejectReason::new(RejectCode::Undecodable, e.to_string()))?;
    let rgb = image::DynamicImage::ImageRgb8(flatten_rgb(&decoded));
    let bytes = encode_png(&rgb).map_err(|e| RejectReason::new(RejectCode::Undecodable, e))?;
    Ok(ExtractedImage {
        bytes,
        format: ImageFormat::Png,
        ..img.clone()
    })
}

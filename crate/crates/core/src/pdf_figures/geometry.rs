//! Page geometry in render coordinates: origin at the top-left corner, y grows downward.

use serde::{Deserialize, Serialize};

/// Slack allowed when deciding whether a caption starts below an image.
pub const DEFAULT_BELOW_TOLERANCE: f64 = 2.0;

/// Axis-aligned box `(x0, y0, x1, y1)` with `x0 <= x1` and `y0 <= y1` (y downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    /// Builds a well-ordered box from any two opposite corners.
    pub fn new(xa: f64, ya: f64, xb: f64, yb: f64) -> Self {
        Self {
            x0: xa.min(xb),
            y0: ya.min(yb),
            x1: xa.max(xb),
            y1: ya.max(yb),
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn is_well_ordered(&self) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1
    }

    /// Lower-left corner: smallest x, largest y.
    pub fn lower_left(&self) -> (f64, f64) {
        (self.x0, self.y1)
    }

    pub fn top_left(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }

    pub fn union(&self, other: &BBox) -> Self {
        Self {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn clamp_to(&self, width: f64, height: f64) -> Self {
        Self {
            x0: self.x0.clamp(0.0, width),
            y0: self.y0.clamp(0.0, height),
            x1: self.x1.clamp(0.0, width),
            y1: self.y1.clamp(0.0, height),
        }
    }

    pub fn horizontal_overlap(&self, other: &BBox) -> f64 {
        (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0)
    }
}

/// Page size and index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageGeometry {
    pub page_index: u32,
    pub width: f64,
    pub height: f64,
}

/// Distance from an image to a caption that starts below it, or `None` when the caption
/// is not below.
///
/// Measured from the image's lower-left corner to the caption's top-left corner. The caption
/// counts as below when its top edge is at or under the image's bottom edge, with
/// [`DEFAULT_BELOW_TOLERANCE`] of slack.
pub fn caption_distance(image: &BBox, caption: &BBox) -> Option<f64> {
    caption_distance_with_tolerance(image, caption, DEFAULT_BELOW_TOLERANCE)
}

pub fn caption_distance_with_tolerance(image: &BBox, caption: &BBox, tol: f64) -> Option<f64> {
    let (xi, yi) = image.lower_left();
    let (xc, yc) = caption.top_left();
    if yc < yi - tol {
        return None;
    }
    let dy = yc - yi;
    let dx = xc - xi;
    Some((dy * dy + dx * dx).sqrt())
}

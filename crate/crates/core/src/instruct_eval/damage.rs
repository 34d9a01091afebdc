use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Euclidean distance in unit-normalized RGB above which a pixel counts as changed.
pub const DEFAULT_COLOR_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DamageConfig {
    pub color_distance_threshold: f64,
}

impl Default for DamageConfig {
    fn default() -> Self {
        Self {
            color_distance_threshold: DEFAULT_COLOR_THRESHOLD,
        }
    }
}

impl DamageConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let t = self.color_distance_threshold;
        if t.is_finite() && t > 0.0 && t <= 3f64.sqrt() {
            Ok(())
        } else {
            Err(EvalError::InvalidThreshold(t))
        }
    }
}

/// Fraction of pixel positions whose colour distance exceeds the threshold.
pub fn diff_proportion(a: &RgbImage, b: &RgbImage, cfg: &DamageConfig) -> Result<f64, EvalError> {
    cfg.validate()?;
    if a.dimensions() != b.dimensions() {
        return Err(EvalError::DimensionMismatch {
            a: a.dimensions(),
            b: b.dimensions(),
        });
    }
    let n = a.width() as usize * a.height() as usize;
    if n == 0 {
        return Err(EvalError::Empty);
    }
    // Compare squared distances in integer units to avoid rounding at the threshold.
    let t = cfg.color_distance_threshold * 255.0;
    let t2 = t * t;
    let changed = a
        .pixels()
        .zip(b.pixels())
        .filter(|(p, q)| {
            let d2: i64 = (0..3).map(|c| (p[c] as i64 - q[c] as i64).pow(2)).sum();
            d2 as f64 > t2
        })
        .count();
    Ok(changed as f64 / n as f64)
}

pub fn diff_proportion_paths(a: &Path, b: &Path, cfg: &DamageConfig) -> Result<f64, EvalError> {
    let load = |p: &Path| {
        image::open(p)
            .map(|i| i.to_rgb8())
            .map_err(|e| EvalError::Image(format!("{}: {e}", p.display())))
    };
    diff_proportion(&load(a)?, &load(b)?, cfg)
}

/// Min-max normalization over the dataset: the minimum maps to exactly 0, the maximum to exactly 1.
pub fn normalize_damage(values: &[f64]) -> Result<Vec<f64>, EvalError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    if lo == hi {
        return Err(EvalError::Degenerate);
    }
    Ok(values
        .iter()
        .map(|&v| {
            if v == hi {
                1.0
            } else {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        })
        .collect())
}

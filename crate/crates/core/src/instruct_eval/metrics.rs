use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdDevKind {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n − 1 (falls back to 0 for a single value).
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub std_dev: f64,
    pub mean: f64,
    pub median: f64,
}

pub fn field_statistics(values: &[f64]) -> Result<FieldStats, EvalError> {
    field_statistics_with(values, StdDevKind::Population)
}

pub fn field_statistics_with(values: &[f64], kind: StdDevKind) -> Result<FieldStats, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let denom = match kind {
        StdDevKind::Population => n as f64,
        StdDevKind::Sample => (n.saturating_sub(1)).max(1) as f64,
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(FieldStats {
        std_dev: (ss / denom).sqrt(),
        mean,
        median,
    })
}

/// Coefficient of determination `1 − SS_res / SS_tot` about the ground-truth mean.
pub fn r_squared(pred: &[f64], gt: &[f64]) -> Result<f64, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if gt.len() < 2 {
        return Err(EvalError::Empty);
    }
    let mean = gt.iter().sum::<f64>() / gt.len() as f64;
    let ss_tot: f64 = gt.iter().map(|g| (g - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::ConstantTruth);
    }
    let ss_res: f64 = pred.iter().zip(gt).map(|(p, g)| (p - g).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Binary classification summary. A metric whose denominator is zero is reported as 0
/// and named in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl ClassificationReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let mut undefined = Vec::new();
        let mut ratio = |name: &str, num: usize, den: usize| {
            if den == 0 {
                undefined.push(name.to_string());
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy = ratio("accuracy", tp + tn, tp + fp + tn + fn_);
        let precision = ratio("precision", tp, tp + fp);
        let recall = ratio("recall", tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            undefined.push("f1".into());
            0.0
        } else {
            // 2tp / (2tp + fp + fn) equals the harmonic mean and is exact in rationals.
            (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
        };
        Self {
            tp,
            fp,
            tn,
            fn_,
            accuracy,
            precision,
            recall,
            f1,
            undefined,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn classification_report(pred: &[bool], gt: &[bool]) -> Result<ClassificationReport, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ClassificationReport::from_counts(tp, fp, tn, fn_))
}

//! Mechanics instruction records, the pixel-difference damage metric and the scoring
//! metrics used to evaluate model answers against simulation ground truth.

mod answer;
mod damage;
mod evaluate;
mod metrics;

pub use answer::{build_instruction, parse_answer_vector, AnswerValue, AnswerVector, InstructionRecord, ParseError, Task};
pub use damage::{diff_proportion, diff_proportion_paths, normalize_damage, DamageConfig, DEFAULT_COLOR_THRESHOLD};
pub use evaluate::{evaluate_run, write_report, ComponentScore, EvalReport};
pub use metrics::{classification_report, field_statistics, field_statistics_with, r_squared, ClassificationReport, FieldStats, StdDevKind};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{task} expects {expected} answer values, got {got}")]
    Arity { task: Task, expected: usize, got: usize },
    #[error("answer element {index} has the wrong type for {task}")]
    ElementType { task: Task, index: usize },
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("normalization undefined: all values equal")]
    Degenerate,
    #[error("ground truth is constant")]
    ConstantTruth,
    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("non-finite value")]
    NonFinite,
    #[error("image: {0}")]
    Image(String),
}

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Stress,
    Energy,
    Crack,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Stress, Task::Energy, Task::Crack];

    pub fn instruction(self) -> &'static str {
        match self {
            Task::Stress => "CalculateVonMisesStressStatistics <stress_stdev, stress_mean, stress_median>",
            Task::Energy => {
                "CalculatePotentialEnergyStatistics <energy_peratom_std_dev, energy_peratom_mean, energy_peratom_median>"
            }
            Task::Crack => "CalculateCrackDynamics <damage, initiate>",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Task::Stress | Task::Energy => 3,
            Task::Crack => 2,
        }
    }

    /// Whether position `index` holds a boolean.
    fn is_bool_slot(self, index: usize) -> bool {
        self == Task::Crack && index == 1
    }

    pub fn component_names(self) -> &'static [&'static str] {
        match self {
            Task::Stress | Task::Energy => &["std_dev", "mean", "median"],
            Task::Crack => &["damage", "initiate"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Stress => "stress",
            Task::Energy => "energy",
            Task::Crack => "crack",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Bool(bool),
    Real(f64),
}

impl AnswerValue {
    pub fn as_real(self) -> Option<f64> {
        match self {
            AnswerValue::Real(v) => Some(v),
            AnswerValue::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            AnswerValue::Bool(b) => Some(b),
            AnswerValue::Real(_) => None,
        }
    }
}

/// Ordered answer values. Displays as `[0.678, 0.603, 0.624]` / `[0.139, True]`:
/// reals rounded to three decimals, booleans capitalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerVector(pub Vec<AnswerValue>);

impl AnswerVector {
    /// Values as they read back after rendering.
    pub fn rounded(&self) -> AnswerVector {
        AnswerVector(
            self.0
                .iter()
                .map(|v| match v {
                    AnswerValue::Real(x) => AnswerValue::Real(format!("{x:.3}").parse().unwrap_or(*x)),
                    b => *b,
                })
                .collect(),
        )
    }
}

impl fmt::Display for AnswerVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match v {
                AnswerValue::Real(x) => write!(f, "{x:.3}")?,
                AnswerValue::Bool(true) => f.write_str("True")?,
                AnswerValue::Bool(false) => f.write_str("False")?,
            }
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub image_ref: String,
    pub task: Task,
    pub instruction: String,
    pub answer: AnswerVector,
}

fn check_shape(task: Task, values: &[AnswerValue]) -> Result<(), EvalError> {
    if values.len() != task.arity() {
        return Err(EvalError::Arity {
            task,
            expected: task.arity(),
            got: values.len(),
        });
    }
    for (i, v) in values.iter().enumerate() {
        let ok = match v {
            AnswerValue::Bool(_) => task.is_bool_slot(i),
            AnswerValue::Real(x) => !task.is_bool_slot(i) && x.is_finite(),
        };
        if !ok {
            return Err(EvalError::ElementType { task, index: i });
        }
    }
    Ok(())
}

pub fn build_instruction(task: Task, image_ref: impl Into<String>, payload: Vec<AnswerValue>) -> Result<InstructionRecord, EvalError> {
    check_shape(task, &payload)?;
    Ok(InstructionRecord {
        image_ref: image_ref.into(),
        task,
        instruction: task.instruction().to_string(),
        answer: AnswerVector(payload),
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no bracketed vector found")]
    NoVector,
    #[error("expected {expected} elements, found {got}")]
    Arity { expected: usize, got: usize },
    #[error("element {index} ({text:?}) is not valid here")]
    BadElement { index: usize, text: String },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::NoVector => "no_vector",
            ParseError::Arity { .. } => "arity",
            ParseError::BadElement { .. } => "bad_element",
        }
    }
}

/// Extract the first `[...]` vector from free text and check it against the task.
pub fn parse_answer_vector(text: &str, task: Task) -> Result<AnswerVector, ParseError> {
    let open = text.find('[').ok_or(ParseError::NoVector)?;
    let close = text[open..].find(']').ok_or(ParseError::NoVector)? + open;
    let body = text[open + 1..close].trim();
    let parts: Vec<&str> = if body.is_empty() { Vec::new() } else { body.split(',').map(str::trim).collect() };
    if parts.len() != task.arity() {
        return Err(ParseError::Arity {
            expected: task.arity(),
            got: parts.len(),
        });
    }
    let values = parts
        .iter()
        .enumerate()
        .map(|(index, part)| {
            let bad = || ParseError::BadElement {
                index,
                text: part.to_string(),
            };
            let part = part.trim_matches(|c| c == '"' || c == '\'');
            if task.is_bool_slot(index) {
                match part {
                    "True" | "true" => Ok(AnswerValue::Bool(true)),
                    "False" | "false" => Ok(AnswerValue::Bool(false)),
                    _ => Err(bad()),
                }
            } else {
                part.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(AnswerValue::Real)
                    .ok_or_else(bad)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AnswerVector(values))
}

use std::fmt;

use serde::Serialize;

/// Error category reported in the machine-readable failure line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Config,
    Input,
    Io,
    Network,
    Runtime,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(Kind::Input, message)
    }

    /// Classify an arbitrary error chain.
    pub fn from_anyhow(err: &anyhow::Error) -> Self {
        if let Some(f) = err.downcast_ref::<Failure>() {
            return f.clone();
        }
        let kind = if err.chain().any(|e| e.is::<std::io::Error>()) {
            Kind::Io
        } else {
            Kind::Runtime
        };
        Self::new(kind, format!("{err:#}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

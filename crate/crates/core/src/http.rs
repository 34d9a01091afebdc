//! Blocking HTTP plumbing shared by the harvester and the refinement client:
//! retry with exponential backoff and per-host request spacing.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("HTTP {status} from {url}")]
    Status { status: u16, url: String },
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("invalid URL {0}")]
    InvalidUrl(String),
}

impl HttpError {
    /// 429, 5xx and transport failures are worth another attempt; other statuses are not.
    pub fn is_retryable(&self) -> bool {
        match self {
            HttpError::Status { status, .. } => *status == 429 || *status >= 500,
            HttpError::Transport { .. } => true,
            HttpError::InvalidUrl(_) => false,
        }
    }

    pub(crate) fn transport(url: &str, err: impl std::fmt::Display) -> Self {
        HttpError::Transport {
            url: url.to_string(),
            message: err.to_string(),
        }
    }
}

/// Exponential backoff: `initial * multiplier^(attempt-1)`, capped at `max_backoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "duration_ms")]
    pub initial_backoff: Duration,
    #[serde(with = "duration_ms")]
    pub max_backoff: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts. Used by tests against local mocks.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            initial_backoff: Duration::ZERO,
            max_backoff: Duration::ZERO,
            multiplier: 1.0,
        }
    }

    /// Delay before retry number `attempt` (1-based count of failures so far).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.multiplier.powi(attempt.saturating_sub(1) as i32);
        let ms = self.initial_backoff.as_secs_f64() * 1000.0 * factor;
        Duration::from_secs_f64((ms / 1000.0).min(self.max_backoff.as_secs_f64()))
    }

    /// Run `op` until it succeeds, fails with a non-retryable error, or attempts run out.
    pub fn run<T>(&self, mut op: impl FnMut(u32) -> Result<T, HttpError>) -> Result<T, HttpError> {
        let attempts = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < attempts => {
                    log::debug!("attempt {attempt}/{attempts} failed: {e}");
                    thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// One request in flight per host, with a minimum spacing between request starts.
#[derive(Debug, Default)]
pub struct HostGate {
    spacing: Duration,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl HostGate {
    pub fn new(spacing: Duration) -> Self {
        Self {
            spacing,
            hosts: Mutex::new(HashMap::new()),
        }
    }

    pub fn run<R>(&self, host: &str, f: impl FnOnce() -> R) -> R {
        let slot = {
            let mut hosts = self.hosts.lock().expect("host gate poisoned");
            hosts.entry(host.to_string()).or_default().clone()
        };
        let mut last = slot.lock().expect("host slot poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.spacing {
                thread::sleep(self.spacing - elapsed);
            }
        }
        *last = Some(Instant::now());
        f()
    }
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

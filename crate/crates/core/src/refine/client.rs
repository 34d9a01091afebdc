use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{RefineTemplate, TemplateId};
use crate::http::{HttpError, RetryPolicy};

/// Accepted response openers; anything else is kept but flagged.
pub const ACCEPTED_OPENERS: [&str; 3] = ["The image shows", "Shown in the image", "The image depicts"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Server root; requests go to `{base_url}/v1/chat/completions`.
    pub base_url: String,
    pub model_name: String,
    pub max_in_flight: usize,
    pub timeout_secs: f64,
    pub retry: RetryPolicy,
    /// Sampling settings sent with every request. Tool defaults, not tuned values.
    pub temperature: f64,
    pub max_tokens: u32,
    /// Environment variable holding a bearer token, if the endpoint needs one.
    pub api_key_env: Option<String>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model_name: "default".into(),
            max_in_flight: 2,
            timeout_secs: 120.0,
            retry: RetryPolicy::default(),
            temperature: 0.2,
            max_tokens: 1024,
            api_key_env: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Validation {
    Pass,
    Warn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub record_id: String,
    pub refined_text: String,
    pub template_id: TemplateId,
    pub model_name: String,
    pub latency_secs: f64,
    pub validation: Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{record_id}: {message}")]
pub struct RefineFailure {
    pub record_id: String,
    pub message: String,
}

pub fn validate_opener(text: &str) -> Validation {
    let head = text.trim_start().to_lowercase();
    if ACCEPTED_OPENERS.iter().any(|o| head.starts_with(&o.to_lowercase())) {
        Validation::Pass
    } else {
        Validation::Warn("opener".into())
    }
}

/// Reusable blocking client for one endpoint.
pub struct RefineClient {
    cfg: EndpointConfig,
    http: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl RefineClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self, HttpError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| HttpError::transport(&cfg.base_url, e))?;
        let url = format!("{}/v1/chat/completions", cfg.base_url.trim_end_matches('/'));
        let api_key = cfg.api_key_env.as_deref().and_then(|k| std::env::var(k).ok());
        Ok(Self { cfg, http, url, api_key })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    fn post(&self, body: &serde_json::Value) -> Result<serde_json::Value, HttpError> {
        self.cfg.retry.run(|_| {
            let mut req = self.http.post(&self.url).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(|e| HttpError::transport(&self.url, e))?;
            let status = resp.status();
            if !status.is_success() {
                return Err(HttpError::Status {
                    status: status.as_u16(),
                    url: self.url.clone(),
                });
            }
            resp.json().map_err(|e| HttpError::transport(&self.url, e))
        })
    }
}

fn data_url(image_bytes: &[u8]) -> Result<String, String> {
    let format = image::guess_format(image_bytes).map_err(|e| format!("unrecognized image: {e}"))?;
    image::load_from_memory_with_format(image_bytes, format).map_err(|e| format!("image does not decode: {e}"))?;
    let b64 = base64::engine::general_purpose::STANDARD.encode(image_bytes);
    Ok(format!("data:{};base64,{b64}", format.to_mime_type()))
}

/// One chat-completions call: system text, user prompt and the image as a data URL.
pub fn refine_caption(
    client: &RefineClient,
    record_id: &str,
    template: &RefineTemplate,
    image_bytes: &[u8],
    prompt: &str,
) -> Result<RefineResult, RefineFailure> {
    let fail = |message: String| RefineFailure {
        record_id: record_id.to_string(),
        message,
    };
    let image = data_url(image_bytes).map_err(fail)?;
    let cfg = client.config();
    let body = json!({
        "model": cfg.model_name,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
        "messages": [
            {"role": "system", "content": template.system_text},
            {"role": "user", "content": [
                {"type": "text", "text": prompt},
                {"type": "image_url", "image_url": {"url": image}}
            ]}
        ]
    });
    let started = Instant::now();
    let resp = client.post(&body).map_err(|e| fail(e.to_string()))?;
    let latency_secs = started.elapsed().as_secs_f64();
    let text = resp
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .ok_or_else(|| fail("response has no choices[0].message.content".into()))?;
    if text.trim().is_empty() {
        return Err(fail("endpoint returned empty text".into()));
    }
    Ok(RefineResult {
        record_id: record_id.to_string(),
        refined_text: text.to_string(),
        template_id: template.id,
        model_name: cfg.model_name.clone(),
        latency_secs,
        validation: validate_opener(text),
    })
}

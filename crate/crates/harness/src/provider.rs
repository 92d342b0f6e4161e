//! Model provider access. One client per run, so no conversation state can
//! leak between runs; two wire dialects behind one trait.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{sha256_hex, Dialect, ModelConfig};
use crate::prompt::{Part, PromptBundle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("no cassette for run {run} of {label} (expected {path})")]
    CassetteMissing { label: String, run: u32, path: String },
    #[error("cassette {path}: {message}")]
    Cassette { path: String, message: String },
    #[error("request does not match cassette at step `{step}`: {message}")]
    CassetteMismatch { step: String, message: String },
}

impl ProviderError {
    /// Errors that stop the whole batch rather than failing one run.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            ProviderError::Auth(_) | ProviderError::CassetteMissing { .. } | ProviderError::Cassette { .. }
        )
    }
}

/// One completion request within a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model: String,
    pub session_id: String,
    pub step: String,
    pub prompt: PromptBundle,
}

impl ModelRequest {
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("request serializes"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub session_id: String,
    pub step: String,
    pub inputs: Vec<String>,
}

impl EmbedRequest {
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("request serializes"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    /// Provider usage and identification fields, as returned.
    pub metadata: Value,
}

pub trait ModelClient: Send {
    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ProviderError>;

    fn embed(&mut self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderError>;

    /// Called once when the run is over.
    fn finish(self: Box<Self>) -> Result<(), ProviderError> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 6,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): doubling, capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Reads the API key named by the model config. A model without
/// `api_key_env` talks to its endpoint unauthenticated.
pub fn resolve_api_key(model: &ModelConfig) -> Result<Option<String>, ProviderError> {
    let Some(var) = &model.api_key_env else {
        return Ok(None);
    };
    match std::env::var(var) {
        Ok(key) if !key.trim().is_empty() => Ok(Some(key)),
        _ => Err(ProviderError::Auth(format!(
            "environment variable {var} for model `{}` is not set",
            model.id
        ))),
    }
}

pub struct HttpClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    dialect: Dialect,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl HttpClient {
    pub fn new(model: &ModelConfig, api_key: Option<String>, retry: RetryPolicy) -> Result<Self, ProviderError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(HttpClient {
            http,
            endpoint: model.endpoint.trim_end_matches('/').to_string(),
            dialect: model.dialect,
            api_key,
            retry,
        })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let url = format!("{}/{path}", self.endpoint);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut req = self.http.post(&url).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let retry_or = |err: ProviderError| -> Result<(), ProviderError> {
                if attempt >= self.retry.max_attempts {
                    Err(err)
                } else {
                    std::thread::sleep(self.retry.delay(attempt));
                    Ok(())
                }
            };
            let resp = match req.send() {
                Ok(resp) => resp,
                Err(e) => {
                    retry_or(ProviderError::Transport(e.to_string()))?;
                    continue;
                }
            };
            let status = resp.status().as_u16();
            match status {
                200..=299 => {
                    let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
                    return serde_json::from_str(&text)
                        .map_err(|e| ProviderError::Malformed(format!("{e}: {}", truncate(&text))));
                }
                401 | 403 => {
                    let body = resp.text().unwrap_or_default();
                    return Err(ProviderError::Auth(format!("HTTP {status}: {}", truncate(&body))));
                }
                429 => retry_or(ProviderError::RateLimited { attempts: attempt })?,
                500..=599 => {
                    let body = resp.text().unwrap_or_default();
                    retry_or(ProviderError::Http { status, body: truncate(&body) })?
                }
                _ => {
                    let body = resp.text().unwrap_or_default();
                    return Err(ProviderError::Http { status, body: truncate(&body) });
                }
            }
        }
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

/// Request body in the configured dialect.
pub fn wire_body(dialect: Dialect, request: &ModelRequest) -> Value {
    match dialect {
        Dialect::Chat => {
            let content: Vec<Value> = request
                .prompt
                .parts
                .iter()
                .map(|p| match p {
                    Part::Text { text } => json!({"type": "text", "text": text}),
                    Part::Image { media_type, data } => json!({
                        "type": "image_url",
                        "image_url": {"url": format!("data:{media_type};base64,{data}")}
                    }),
                })
                .collect();
            json!({
                "model": request.model,
                "messages": [{"role": "user", "content": content}],
            })
        }
        Dialect::Completion => {
            let images: Vec<&str> = request
                .prompt
                .parts
                .iter()
                .filter_map(|p| match p {
                    Part::Image { data, .. } => Some(data.as_str()),
                    Part::Text { .. } => None,
                })
                .collect();
            let mut body = json!({"model": request.model, "prompt": request.prompt.text()});
            if !images.is_empty() {
                body["images"] = json!(images);
            }
            body
        }
    }
}

/// Extracts the response text and usage metadata.
pub fn parse_wire_response(dialect: Dialect, body: &Value) -> Result<ModelResponse, ProviderError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| ProviderError::Malformed("no choices".into()))?;
    let text = match dialect {
        Dialect::Chat => {
            let content = choice
                .get("message")
                .and_then(|m| m.get("content"))
                .ok_or_else(|| ProviderError::Malformed("no message content".into()))?;
            match content {
                Value::String(s) => s.clone(),
                Value::Array(parts) => parts
                    .iter()
                    .filter_map(|p| p.get("text").and_then(Value::as_str))
                    .collect(),
                _ => return Err(ProviderError::Malformed("message content is not text".into())),
            }
        }
        Dialect::Completion => choice
            .get("text")
            .and_then(Value::as_str)
            .ok_or_else(|| ProviderError::Malformed("no completion text".into()))?
            .to_string(),
    };
    let mut metadata = serde_json::Map::new();
    for key in ["id", "model", "usage", "created"] {
        if let Some(v) = body.get(key) {
            metadata.insert(key.into(), v.clone());
        }
    }
    if let Some(v) = choice.get("finish_reason") {
        metadata.insert("finish_reason".into(), v.clone());
    }
    Ok(ModelResponse {
        text,
        metadata: Value::Object(metadata),
    })
}

impl ModelClient for HttpClient {
    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        let path = match self.dialect {
            Dialect::Chat => "chat/completions",
            Dialect::Completion => "completions",
        };
        let body = self.post(path, &wire_body(self.dialect, request))?;
        parse_wire_response(self.dialect, &body)
    }

    fn embed(&mut self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = self.post("embeddings", &json!({"model": request.model, "input": request.inputs}))?;
        let data = body
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Malformed("no embedding data".into()))?;
        let vectors: Vec<Vec<f64>> = data
            .iter()
            .map(|d| {
                d.get("embedding")
                    .and_then(Value::as_array)
                    .map(|v| v.iter().filter_map(Value::as_f64).collect())
                    .ok_or_else(|| ProviderError::Malformed("embedding is not an array".into()))
            })
            .collect::<Result<_, _>>()?;
        if vectors.len() != request.inputs.len() {
            return Err(ProviderError::Malformed(format!(
                "{} embeddings for {} inputs",
                vectors.len(),
                request.inputs.len()
            )));
        }
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> ModelRequest {
        ModelRequest {
            model: "m".into(),
            session_id: "s".into(),
            step: "generate".into(),
            prompt: PromptBundle {
                template_id: "t".into(),
                parts: vec![
                    Part::Text { text: "hello".into() },
                    Part::Image { media_type: "image/png".into(), data: "AAAA".into() },
                ],
            },
        }
    }

    #[test]
    fn chat_body_has_image_parts() {
        let body = wire_body(Dialect::Chat, &request());
        assert_eq!(body["messages"][0]["content"][1]["image_url"]["url"], "data:image/png;base64,AAAA");
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn completion_body_moves_images_aside() {
        let body = wire_body(Dialect::Completion, &request());
        assert_eq!(body["prompt"], "hello");
        assert_eq!(body["images"][0], "AAAA");
    }

    #[test]
    fn response_parsing() {
        let chat = json!({"id": "x", "usage": {"total_tokens": 3}, "choices": [{"message": {"content": "ttl"}, "finish_reason": "stop"}]});
        let r = parse_wire_response(Dialect::Chat, &chat).unwrap();
        assert_eq!(r.text, "ttl");
        assert_eq!(r.metadata["usage"]["total_tokens"], 3);
        let completion = json!({"choices": [{"text": "ttl"}]});
        assert_eq!(parse_wire_response(Dialect::Completion, &completion).unwrap().text, "ttl");
        assert!(matches!(parse_wire_response(Dialect::Chat, &json!({})), Err(ProviderError::Malformed(_))));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(500),
        };
        let delays: Vec<u128> = (1..=5).map(|a| p.delay(a).as_millis()).collect();
        assert_eq!(delays, [100, 200, 400, 500, 500]);
        assert_eq!(p.delay(60), Duration::from_millis(500));
    }

    #[test]
    fn request_hash_depends_on_content() {
        let a = request();
        let mut b = request();
        assert_eq!(a.hash(), b.hash());
        b.step = "describe".into();
        assert_ne!(a.hash(), b.hash());
    }
}

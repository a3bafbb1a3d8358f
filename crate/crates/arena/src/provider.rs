//! Chat-completion client with transport-level retries.

use std::time::Duration;

use econ_arena_core::agents::ProviderConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

const MAX_BACKOFF: Duration = Duration::from_secs(8);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("provider rejected the request with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed provider reply: {0}")]
    MalformedReply(String),
}

impl ProviderError {
    /// Short label stored in run logs.
    pub fn class(&self) -> &'static str {
        match self {
            ProviderError::MissingApiKey(_) => "missing_api_key",
            ProviderError::Transport { .. } => "transport",
            ProviderError::Timeout { .. } => "timeout",
            ProviderError::Rejected { .. } => "rejected",
            ProviderError::MalformedReply(_) => "malformed_reply",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

enum Attempt {
    Retry(ProviderError),
    Fatal(ProviderError),
}

#[derive(Debug, Clone, Default)]
pub struct ChatClient {
    http: reqwest::Client,
}

impl ChatClient {
    pub fn new() -> Self {
        ChatClient { http: reqwest::Client::new() }
    }

    /// Sends one chat request, retrying connection errors, timeouts, 5xx and
    /// 429 replies up to `max_transport_retries` times with exponential
    /// backoff. Returns the first choice's message content verbatim.
    pub async fn complete(&self, cfg: &ProviderConfig, messages: &[ChatMessage]) -> Result<Completion, ProviderError> {
        let key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| ProviderError::MissingApiKey(var.clone()))?),
            None => None,
        };
        let body = ChatRequest { model: &cfg.model_id, messages, temperature: cfg.temperature };
        let mut backoff = Duration::from_millis(cfg.initial_backoff_ms);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(cfg, key.as_deref(), &body, attempts).await {
                Ok(text) => return Ok(Completion { text, attempts }),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) if attempts > cfg.max_transport_retries => return Err(e),
                Err(Attempt::Retry(e)) => {
                    tracing::debug!(model = %cfg.model_id, attempt = attempts, error = %e, "retrying");
                    tokio::time::sleep(backoff).await;
                    backoff = (backoff * 2).min(MAX_BACKOFF);
                }
            }
        }
    }

    async fn attempt(
        &self,
        cfg: &ProviderConfig,
        key: Option<&str>,
        body: &ChatRequest<'_>,
        attempts: u32,
    ) -> Result<String, Attempt> {
        let mut req = self.http.post(&cfg.endpoint_url).timeout(cfg.timeout).json(body);
        if let Some(key) = key {
            req = req.bearer_auth(key);
        }
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                Attempt::Retry(ProviderError::Timeout { attempts })
            } else {
                Attempt::Retry(ProviderError::Transport { attempts, message: e.to_string() })
            }
        };
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status();
        let text = resp.text().await.map_err(transport)?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(ProviderError::Transport {
                attempts,
                message: format!("HTTP {status}"),
            }));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(ProviderError::Rejected { status: status.as_u16(), body: text }));
        }
        extract_content(&text).map_err(Attempt::Fatal)
    }
}

fn extract_content(body: &str) -> Result<String, ProviderError> {
    let value: Value = serde_json::from_str(body).map_err(|e| ProviderError::MalformedReply(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::MalformedReply("no choices[0].message.content string".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"index":0,"message":{"role":"assistant","content":"{\"bid\": 5}"}}]}"#;
        assert_eq!(extract_content(body).unwrap(), r#"{"bid": 5}"#);
        assert!(matches!(extract_content("{}"), Err(ProviderError::MalformedReply(_))));
        assert!(matches!(extract_content("not json"), Err(ProviderError::MalformedReply(_))));
        assert!(matches!(
            extract_content(r#"{"choices":[{"message":{"content":7}}]}"#),
            Err(ProviderError::MalformedReply(_))
        ));
    }

    #[test]
    fn request_wire_shape() {
        let messages = [ChatMessage::system("s"), ChatMessage::user("u")];
        let body = ChatRequest { model: "m", messages: &messages, temperature: 0.7 };
        assert_eq!(
            serde_json::to_string(&body).unwrap(),
            r#"{"model":"m","messages":[{"role":"system","content":"s"},{"role":"user","content":"u"}],"temperature":0.7}"#
        );
    }

    #[tokio::test]
    async fn missing_key_fails_before_any_request() {
        let cfg = ProviderConfig {
            endpoint_url: "http://127.0.0.1:9/".into(),
            model_id: "m".into(),
            api_key_env: Some("ARENA_TEST_SURELY_UNSET_KEY".into()),
            temperature: 0.0,
            timeout: Duration::from_secs(1),
            max_transport_retries: 0,
            initial_backoff_ms: 1,
        };
        let err = ChatClient::new().complete(&cfg, &[ChatMessage::user("x")]).await.unwrap_err();
        assert_eq!(err, ProviderError::MissingApiKey("ARENA_TEST_SURELY_UNSET_KEY".into()));
    }
}

//! Scripted chat-completion server for offline tests.
//!
//! A script maps model ids to a queue of steps. Each request for a model
//! consumes the next step; the last step repeats once the queue is exhausted.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockStep {
    /// HTTP status to answer with.
    #[serde(default = "ok_status")]
    pub status: u16,
    /// Completion text wrapped in a chat-completion reply.
    #[serde(default)]
    pub content: Option<String>,
    /// Body sent verbatim instead of a chat-completion reply.
    #[serde(default)]
    pub raw_body: Option<String>,
    #[serde(default)]
    pub delay_ms: u64,
}

fn ok_status() -> u16 {
    200
}

impl MockStep {
    pub fn reply(content: impl Into<String>) -> Self {
        MockStep { status: 200, content: Some(content.into()), raw_body: None, delay_ms: 0 }
    }

    pub fn status(status: u16) -> Self {
        MockStep { status, content: None, raw_body: None, delay_ms: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub models: HashMap<String, Vec<MockStep>>,
    /// Used for models without their own queue.
    #[serde(default)]
    pub default: Vec<MockStep>,
}

impl MockScript {
    /// Reads a script from TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let script = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        Ok(script)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub model: Option<String>,
    pub authorization: Option<String>,
    pub body: Value,
}

#[derive(Default)]
struct Shared {
    script: MockScript,
    served: Mutex<HashMap<String, usize>>,
    requests: Mutex<Vec<RecordedRequest>>,
}

pub struct MockServer {
    pub addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl MockServer {
    pub async fn start(script: MockScript, addr: SocketAddr) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared { script, ..Shared::default() });
        let app = Router::new().fallback(handle).with_state(shared.clone());
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let served = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = rx.await;
            });
            if let Err(e) = served.await {
                tracing::error!(error = %e, "mock server stopped");
            }
        });
        Ok(MockServer { addr, shared, shutdown: Some(tx), task })
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.shared.requests.lock().expect("request log poisoned").clone()
    }

    /// Resolves when the server task ends (it runs until shut down).
    pub async fn wait(mut self) {
        let _ = (&mut self.task).await;
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.task).await;
    }
}

async fn handle(State(shared): State<Arc<Shared>>, headers: HeaderMap, body: Bytes) -> Response {
    let parsed: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let model = parsed.get("model").and_then(Value::as_str).map(str::to_string);
    shared.requests.lock().expect("request log poisoned").push(RecordedRequest {
        model: model.clone(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
        body: parsed,
    });

    let key = model.clone().unwrap_or_default();
    let queue = shared.script.models.get(&key).unwrap_or(&shared.script.default);
    let index = {
        let mut served = shared.served.lock().expect("counter poisoned");
        let n = served.entry(key).or_insert(0);
        *n += 1;
        *n - 1
    };
    let Some(step) = queue.get(index).or(queue.last()).cloned() else {
        return (StatusCode::NOT_FOUND, "no scripted reply for this model").into_response();
    };
    if step.delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(step.delay_ms)).await;
    }
    let status = StatusCode::from_u16(step.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = match (&step.raw_body, &step.content) {
        (Some(raw), _) => raw.clone(),
        (None, Some(content)) => json!({
            "id": format!("mock-{index}"),
            "object": "chat.completion",
            "model": model,
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop"
            }]
        })
        .to_string(),
        (None, None) => json!({"error": {"message": format!("scripted status {}", step.status)}}).to_string(),
    };
    (status, [("content-type", "application/json")], body).into_response()
}

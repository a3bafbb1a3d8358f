use std::collections::HashMap;
use std::time::Duration;

use econ_arena::mock::{MockScript, MockServer, MockStep};
use econ_arena::provider::{ChatClient, ChatMessage, ProviderError};
use econ_arena_core::agents::ProviderConfig;

fn provider(url: String, model: &str, retries: u32, timeout_ms: u64) -> ProviderConfig {
    ProviderConfig {
        endpoint_url: url,
        model_id: model.into(),
        api_key_env: None,
        temperature: 0.0,
        timeout: Duration::from_millis(timeout_ms),
        max_transport_retries: retries,
        initial_backoff_ms: 5,
    }
}

async fn serve(models: Vec<(&str, Vec<MockStep>)>) -> MockServer {
    let script = MockScript {
        models: models.into_iter().map(|(m, s)| (m.to_string(), s)).collect::<HashMap<_, _>>(),
        default: Vec::new(),
    };
    MockServer::start(script, "127.0.0.1:0".parse().unwrap()).await.unwrap()
}

fn messages() -> Vec<ChatMessage> {
    vec![ChatMessage::system("sys"), ChatMessage::user("play")]
}

#[tokio::test]
async fn canned_text_is_returned_verbatim() {
    let canned = "  {\"answer\": 0.0, \"reason\": \"ünïcode ✓\"}\n";
    let server = serve(vec![("m", vec![MockStep::reply(canned)])]).await;
    let c = ChatClient::new().complete(&provider(server.url(), "m", 0, 2000), &messages()).await.unwrap();
    assert_eq!(c.text, canned);
    assert_eq!(c.attempts, 1);

    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].body["model"], "m");
    assert_eq!(reqs[0].body["messages"][0]["role"], "system");
    assert_eq!(reqs[0].body["messages"][1]["content"], "play");
    assert_eq!(reqs[0].body["temperature"], 0.0);
    assert_eq!(reqs[0].authorization, None);
    server.shutdown().await;
}

#[tokio::test]
async fn two_server_errors_then_success() {
    let server = serve(vec![("m", vec![MockStep::status(500), MockStep::status(500), MockStep::reply("ok")])]).await;
    let c = ChatClient::new().complete(&provider(server.url(), "m", 3, 2000), &messages()).await.unwrap();
    assert_eq!((c.text.as_str(), c.attempts), ("ok", 3));
    assert_eq!(server.requests().len(), 3);
    server.shutdown().await;
}

#[tokio::test]
async fn retries_exhausted() {
    let server = serve(vec![("m", vec![MockStep::status(503)])]).await;
    let err = ChatClient::new().complete(&provider(server.url(), "m", 2, 2000), &messages()).await.unwrap_err();
    assert!(matches!(err, ProviderError::Transport { attempts: 3, .. }), "{err:?}");
    server.shutdown().await;
}

#[tokio::test]
async fn silent_server_times_out() {
    let slow = MockStep { delay_ms: 2_000, ..MockStep::reply("late") };
    let server = serve(vec![("m", vec![slow])]).await;
    let err = ChatClient::new().complete(&provider(server.url(), "m", 1, 100), &messages()).await.unwrap_err();
    assert_eq!(err, ProviderError::Timeout { attempts: 2 });
    assert_eq!(server.requests().len(), 2);
    server.shutdown().await;
}

#[tokio::test]
async fn malformed_and_rejected_replies_are_not_retried() {
    let garbage = MockStep { raw_body: Some("<html>oops</html>".into()), ..MockStep::status(200) };
    let server = serve(vec![("bad", vec![garbage]), ("denied", vec![MockStep::status(401)])]).await;
    let client = ChatClient::new();
    let err = client.complete(&provider(server.url(), "bad", 3, 2000), &messages()).await.unwrap_err();
    assert!(matches!(err, ProviderError::MalformedReply(_)));
    let err = client.complete(&provider(server.url(), "denied", 3, 2000), &messages()).await.unwrap_err();
    assert!(matches!(err, ProviderError::Rejected { status: 401, .. }));
    assert_eq!(server.requests().len(), 2);
    server.shutdown().await;
}

#[tokio::test]
async fn bearer_key_comes_from_environment() {
    std::env::set_var("ARENA_PROVIDER_TEST_KEY", "sk-test-123");
    let server = serve(vec![("m", vec![MockStep::reply("{}")])]).await;
    let mut cfg = provider(server.url(), "m", 0, 2000);
    cfg.api_key_env = Some("ARENA_PROVIDER_TEST_KEY".into());
    ChatClient::new().complete(&cfg, &messages()).await.unwrap();
    assert_eq!(server.requests()[0].authorization.as_deref(), Some("Bearer sk-test-123"));
    server.shutdown().await;
}

#[tokio::test]
async fn last_step_repeats_and_models_are_independent() {
    let server = serve(vec![("a", vec![MockStep::reply("a1"), MockStep::reply("a2")]), ("b", vec![MockStep::reply("b1")])]).await;
    let client = ChatClient::new();
    let mut got = Vec::new();
    for model in ["a", "b", "a", "a", "b"] {
        got.push(client.complete(&provider(server.url(), model, 0, 2000), &messages()).await.unwrap().text);
    }
    assert_eq!(got, ["a1", "b1", "a2", "a2", "b1"]);
    server.shutdown().await;
}

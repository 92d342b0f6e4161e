//! HttpClient against a local stub server.

use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use kgbench::config::{Dialect, ModelConfig};
use kgbench::prompt::{Part, PromptBundle};
use kgbench::provider::{HttpClient, ModelClient, ModelRequest, ProviderError, RetryPolicy};
use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

struct Seen {
    path: String,
    auth: Option<String>,
    body: Value,
}

/// Serves the scripted (status, body) pairs in order, then stops.
fn stub(script: Vec<(u16, Value)>) -> (String, mpsc::Receiver<Seen>) {
    let server = Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", server.server_addr().to_ip().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in script {
            let mut req = server.recv().unwrap();
            let mut text = String::new();
            req.as_reader().read_to_string(&mut text).unwrap();
            let auth = req
                .headers()
                .iter()
                .find(|h| h.field.equiv("Authorization"))
                .map(|h| h.value.to_string());
            tx.send(Seen {
                path: req.url().to_string(),
                auth,
                body: serde_json::from_str(&text).unwrap_or(Value::Null),
            })
            .unwrap();
            let header = Header::from_bytes("Content-Type", "application/json").unwrap();
            req.respond(Response::from_string(body.to_string()).with_status_code(status).with_header(header))
                .unwrap();
        }
    });
    (url, rx)
}

fn model(endpoint: &str, dialect: Dialect) -> ModelConfig {
    ModelConfig {
        id: "stub".into(),
        dialect,
        endpoint: endpoint.into(),
        model: None,
        api_key_env: None,
        methods: None,
        embedding_model: None,
    }
}

fn quick(max_attempts: u32) -> RetryPolicy {
    RetryPolicy {
        max_attempts,
        base_delay: Duration::from_millis(5),
        max_delay: Duration::from_millis(20),
    }
}

fn request() -> ModelRequest {
    ModelRequest {
        model: "stub-model".into(),
        session_id: "s".into(),
        step: "generate".into(),
        prompt: PromptBundle {
            template_id: "t".into(),
            parts: vec![
                Part::Text { text: "describe this".into() },
                Part::Image {
                    media_type: "image/png".into(),
                    data: "AAAA".into(),
                },
            ],
        },
    }
}

fn chat_ok(text: &str) -> Value {
    json!({"id": "c1", "model": "stub-model", "choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}], "usage": {"total_tokens": 3}})
}

#[test]
fn chat_wire_format() {
    let (url, seen) = stub(vec![(200, chat_ok("hello"))]);
    let mut client = HttpClient::new(&model(&url, Dialect::Chat), Some("k-123".into()), quick(1)).unwrap();
    let resp = client.complete(&request()).unwrap();
    assert_eq!(resp.text, "hello");
    assert_eq!(resp.metadata["usage"]["total_tokens"], 3);
    assert_eq!(resp.metadata["finish_reason"], "stop");
    let s = seen.recv().unwrap();
    assert_eq!(s.path, "/v1/chat/completions");
    assert_eq!(s.auth.as_deref(), Some("Bearer k-123"));
    let content = &s.body["messages"][0]["content"];
    assert_eq!(content[0]["text"], "describe this");
    assert_eq!(content[1]["image_url"]["url"], "data:image/png;base64,AAAA");
}

#[test]
fn completion_wire_format() {
    let (url, seen) = stub(vec![(200, json!({"choices": [{"text": "done"}]}))]);
    let mut client = HttpClient::new(&model(&url, Dialect::Completion), None, quick(1)).unwrap();
    assert_eq!(client.complete(&request()).unwrap().text, "done");
    let s = seen.recv().unwrap();
    assert_eq!(s.path, "/v1/completions");
    assert_eq!(s.auth, None);
    assert_eq!(s.body["prompt"], "describe this");
    assert_eq!(s.body["images"], json!(["AAAA"]));
}

#[test]
fn rate_limit_then_success() {
    let (url, seen) = stub(vec![(429, json!({})), (429, json!({})), (200, chat_ok("third time"))]);
    let mut client = HttpClient::new(&model(&url, Dialect::Chat), None, quick(5)).unwrap();
    assert_eq!(client.complete(&request()).unwrap().text, "third time");
    assert_eq!(seen.try_iter().count(), 3);
}

#[test]
fn rate_limit_gives_up() {
    let (url, seen) = stub(vec![(429, json!({})); 3]);
    let mut client = HttpClient::new(&model(&url, Dialect::Chat), None, quick(3)).unwrap();
    let err = client.complete(&request()).unwrap_err();
    assert!(matches!(err, ProviderError::RateLimited { attempts: 3 }), "{err}");
    assert!(!err.is_fatal());
    assert_eq!(seen.try_iter().count(), 3);
}

#[test]
fn unauthorized_is_fatal() {
    let (url, seen) = stub(vec![(401, json!({"error": "bad key"}))]);
    let mut client = HttpClient::new(&model(&url, Dialect::Chat), Some("wrong".into()), quick(4)).unwrap();
    let err = client.complete(&request()).unwrap_err();
    assert!(matches!(err, ProviderError::Auth(_)), "{err}");
    assert!(err.is_fatal());
    // no retry on 401
    assert_eq!(seen.try_iter().count(), 1);
}

#[test]
fn server_error_is_retried() {
    let (url, _seen) = stub(vec![(503, json!({})), (200, chat_ok("ok"))]);
    let mut client = HttpClient::new(&model(&url, Dialect::Chat), None, quick(2)).unwrap();
    assert_eq!(client.complete(&request()).unwrap().text, "ok");
}

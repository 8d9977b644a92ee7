// SPDX-License-Identifier: Apache-2.0

//! Caption client and batch pipeline against a local stub endpoint.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use lexret::caption::{
    caption_dataset, CaptionCache, CaptionClient, CaptionError, CaptionRequest, ClientConfig, ImagePayload,
    DEFAULT_PROMPT,
};
use lexret::crops::CropPattern;
use lexret::dataset::ImageRecord;

#[derive(Default)]
struct Stub {
    /// Scripted `(status, content)` replies; afterwards every call succeeds.
    script: Mutex<VecDeque<(u16, String)>>,
    always_fail: bool,
    calls: AtomicUsize,
    bodies: Mutex<Vec<Value>>,
}

async fn reply(State(stub): State<Arc<Stub>>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let n = stub.calls.fetch_add(1, Ordering::SeqCst);
    stub.bodies.lock().unwrap().push(body);
    if stub.always_fail {
        return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": "down"})));
    }
    let (status, content) = stub
        .script
        .lock()
        .unwrap()
        .pop_front()
        .unwrap_or((200, format!("A caption number {n}.")));
    let status = StatusCode::from_u16(status).unwrap();
    (status, Json(json!({"choices": [{"message": {"role": "assistant", "content": content}}]})))
}

async fn spawn(stub: Stub) -> (String, Arc<Stub>) {
    let stub = Arc::new(stub);
    let app = Router::new()
        .route("/v1/chat/completions", post(reply))
        .with_state(stub.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1/chat/completions"), stub)
}

fn config(endpoint: &str) -> ClientConfig {
    let mut c = ClientConfig::new(endpoint, "stub-model");
    c.retry.base_delay = Duration::from_millis(1);
    c.retry.max_delay = Duration::from_millis(4);
    c.timeout = Duration::from_secs(5);
    c
}

fn request() -> CaptionRequest {
    let image = ImagePayload {
        bytes: vec![1, 2, 3],
        mime: "image/png".into(),
    };
    CaptionRequest::new(image, "abc123", None)
}

fn script(items: &[(u16, &str)]) -> Stub {
    Stub {
        script: Mutex::new(items.iter().map(|(s, c)| (*s, c.to_string())).collect()),
        ..Stub::default()
    }
}

#[tokio::test]
async fn retries_server_errors_then_succeeds() {
    let (url, stub) = spawn(script(&[(500, ""), (500, ""), (500, ""), (200, "A dog.")])).await;
    let client = CaptionClient::new(config(&url), None).unwrap();
    assert_eq!(client.request_captions(&request()).await.unwrap(), "A dog.");
    assert_eq!(stub.calls.load(Ordering::SeqCst), 4);
    assert_eq!(client.network_calls(), 4);
}

#[tokio::test]
async fn gives_up_after_max_attempts() {
    let (url, stub) = spawn(Stub {
        always_fail: true,
        ..Stub::default()
    })
    .await;
    let mut cfg = config(&url);
    cfg.retry.max_attempts = 3;
    let client = CaptionClient::new(cfg, None).unwrap();
    let err = client.request_captions(&request()).await.unwrap_err();
    assert!(matches!(err, CaptionError::Http { status: 500, attempts: 3, .. }), "{err:?}");
    assert_eq!(stub.calls.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let (url, stub) = spawn(script(&[(400, "bad")])).await;
    let client = CaptionClient::new(config(&url), None).unwrap();
    let err = client.request_captions(&request()).await.unwrap_err();
    assert!(matches!(err, CaptionError::Http { status: 400, attempts: 1, .. }));
    assert_eq!(stub.calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn rate_limit_is_retried() {
    let (url, _stub) = spawn(script(&[(429, ""), (200, "Fine.")])).await;
    let client = CaptionClient::new(config(&url), None).unwrap();
    assert_eq!(client.request_captions(&request()).await.unwrap(), "Fine.");
}

#[tokio::test]
async fn empty_response_is_flagged_and_not_cached() {
    let dir = tempfile::tempdir().unwrap();
    let (url, _stub) = spawn(script(&[(200, "   ")])).await;
    let client = CaptionClient::new(config(&url), Some(CaptionCache::open(dir.path()).unwrap())).unwrap();
    assert!(matches!(client.request_captions(&request()).await, Err(CaptionError::EmptyResponse)));
    assert_eq!(client.request_captions(&request()).await.unwrap(), "A caption number 1.");
}

#[tokio::test]
async fn unreachable_endpoint_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    drop(listener);
    let mut cfg = config(&url);
    cfg.retry.max_attempts = 2;
    let client = CaptionClient::new(cfg, None).unwrap();
    let err = client.request_captions(&request()).await.unwrap_err();
    assert!(matches!(err, CaptionError::Transport { attempts: 2, .. }), "{err:?}");
}

#[tokio::test]
async fn cache_hit_makes_no_call() {
    let dir = tempfile::tempdir().unwrap();
    let (url, stub) = spawn(Stub::default()).await;
    let cache = CaptionCache::open(dir.path()).unwrap();
    let client = CaptionClient::new(config(&url), Some(cache)).unwrap();
    let key = client.cache_key("abc123", None, DEFAULT_PROMPT);
    client.cache().unwrap().put(&key, "Cached caption.").unwrap();
    assert_eq!(client.request_captions(&request()).await.unwrap(), "Cached caption.");
    assert_eq!(stub.calls.load(Ordering::SeqCst), 0);
    assert_eq!(client.network_calls(), 0);
    assert_eq!(client.cache_hits(), 1);
}

#[tokio::test]
async fn request_body_shape() {
    let (url, stub) = spawn(Stub::default()).await;
    let client = CaptionClient::new(config(&url), None).unwrap();
    client.request_captions(&request()).await.unwrap();
    let body = stub.bodies.lock().unwrap()[0].clone();
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 512);
    let content = &body["messages"][0]["content"];
    assert_eq!(content[0]["type"], "image_url");
    assert_eq!(content[0]["image_url"]["url"], "data:image/png;base64,AQID");
    assert_eq!(content[1]["text"], DEFAULT_PROMPT);
}

fn write_png(dir: &std::path::Path, name: &str, w: u32, h: u32) {
    let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb([(x * 4) as u8, (y * 4) as u8, 128]));
    img.save(dir.join(name)).unwrap();
}

#[tokio::test]
async fn pipeline_captions_crops_and_resumes_from_cache() {
    let images = tempfile::tempdir().unwrap();
    let cache_dir = tempfile::tempdir().unwrap();
    write_png(images.path(), "a.png", 60, 45);
    let mut rec = ImageRecord::new("1", &[], &[]);
    rec.path = "a.png".into();
    let records = vec![rec];
    let (url, stub) = spawn(Stub::default()).await;
    let pattern = CropPattern::crops17();

    let client = CaptionClient::new(config(&url), Some(CaptionCache::open(cache_dir.path()).unwrap())).unwrap();
    let first = caption_dataset(&records, &pattern, &client, DEFAULT_PROMPT, Some(images.path()), 4, &|_| {}).await;
    assert!(first.failures.is_empty(), "{:?}", first.failures);
    assert_eq!(stub.calls.load(Ordering::SeqCst), 18);
    let doc = &first.documents[0];
    assert_eq!(doc.per_source.len(), 18);
    assert!(doc.check().is_ok());
    assert_eq!(doc.per_source[0].rect, None);
    assert_eq!(doc.per_source[1].rect.unwrap().w, 30);

    // crops go out as PNG tiles, the original as its own bytes
    let bodies = stub.bodies.lock().unwrap().clone();
    assert!(bodies.iter().all(|b| b["messages"][0]["content"][0]["image_url"]["url"]
        .as_str()
        .unwrap()
        .starts_with("data:image/png;base64,")));

    let again = CaptionClient::new(config(&url), Some(CaptionCache::open(cache_dir.path()).unwrap())).unwrap();
    let second = caption_dataset(&records, &pattern, &again, DEFAULT_PROMPT, Some(images.path()), 4, &|_| {}).await;
    assert_eq!(again.network_calls(), 0);
    assert_eq!(stub.calls.load(Ordering::SeqCst), 18);
    assert_eq!(second.documents, first.documents);
}

#[tokio::test]
async fn pipeline_quarantines_failures() {
    let images = tempfile::tempdir().unwrap();
    write_png(images.path(), "ok.png", 20, 20);
    let mut good = ImageRecord::new("1", &[], &[]);
    good.path = "ok.png".into();
    let mut missing = ImageRecord::new("2", &[], &[]);
    missing.path = "missing.png".into();
    let (url, _stub) = spawn(Stub {
        always_fail: true,
        ..Stub::default()
    })
    .await;
    let mut cfg = config(&url);
    cfg.retry.max_attempts = 2;
    let client = CaptionClient::new(cfg, None).unwrap();
    let seen = Mutex::new(Vec::new());
    let progress = |p: lexret::caption::Progress<'_>| seen.lock().unwrap().push((p.image_id.to_owned(), p.ok));
    let run = caption_dataset(
        &[good, missing],
        &CropPattern::none(),
        &client,
        DEFAULT_PROMPT,
        Some(images.path()),
        2,
        &progress,
    )
    .await;
    assert!(run.documents.is_empty());
    assert_eq!(run.failures.len(), 2);
    assert_eq!(run.failures[0].j, Some(0));
    assert_eq!(run.failures[1].j, None);
    assert_eq!(*seen.lock().unwrap(), [("1".to_owned(), false), ("2".to_owned(), false)]);
}

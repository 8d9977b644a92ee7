// SPDX-License-Identifier: Apache-2.0

//! OpenAI-compatible chat-completions client with one image attachment.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::cache::{CacheKey, CaptionCache};
use super::{CaptionError, DEFAULT_PROMPT};
use crate::crops::CropRect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_tokens: 512,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub params: GenerationParams,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            model: model.into(),
            params: GenerationParams::default(),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(300),
        }
    }
}

/// Encoded raster sent to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePayload {
    pub bytes: Vec<u8>,
    pub mime: String,
}

impl ImagePayload {
    pub fn data_url(&self) -> String {
        format!(
            "data:{};base64,{}",
            self.mime,
            base64::engine::general_purpose::STANDARD.encode(&self.bytes)
        )
    }
}

#[derive(Debug, Clone)]
pub struct CaptionRequest {
    pub image: ImagePayload,
    /// SHA-256 of the original (uncropped) image file.
    pub image_sha256: String,
    pub rect: Option<CropRect>,
    pub prompt: String,
}

impl CaptionRequest {
    pub fn new(image: ImagePayload, image_sha256: impl Into<String>, rect: Option<CropRect>) -> Self {
        Self {
            image,
            image_sha256: image_sha256.into(),
            rect,
            prompt: DEFAULT_PROMPT.to_owned(),
        }
    }
}

pub struct CaptionClient {
    http: reqwest::Client,
    config: ClientConfig,
    cache: Option<CaptionCache>,
    network_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl CaptionClient {
    pub fn new(config: ClientConfig, cache: Option<CaptionCache>) -> Result<Self, CaptionError> {
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| CaptionError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self {
            http,
            config,
            cache,
            network_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn cache(&self) -> Option<&CaptionCache> {
        self.cache.as_ref()
    }

    /// HTTP attempts issued so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn cache_key(&self, image_sha256: &str, rect: Option<CropRect>, prompt: &str) -> CacheKey {
        CacheKey {
            image_sha256: image_sha256.to_owned(),
            rect,
            prompt: prompt.to_owned(),
            model: self.config.model.clone(),
        }
    }

    pub fn cached(&self, key: &CacheKey) -> Option<String> {
        let hit = self.cache.as_ref()?.get(key)?;
        self.cache_hits.fetch_add(1, Ordering::Relaxed);
        Some(hit)
    }

    /// Raw model response for one image, served from cache when possible.
    pub async fn request_captions(&self, req: &CaptionRequest) -> Result<String, CaptionError> {
        let key = self.cache_key(&req.image_sha256, req.rect, &req.prompt);
        if let Some(text) = self.cached(&key) {
            return Ok(text);
        }
        let text = self.call_with_retry(req).await?;
        if text.trim().is_empty() {
            return Err(CaptionError::EmptyResponse);
        }
        if let Some(cache) = &self.cache {
            cache.put(&key, &text)?;
        }
        Ok(text)
    }

    fn body(&self, req: &CaptionRequest) -> Value {
        json!({
            "model": self.config.model,
            "max_tokens": self.config.params.max_tokens,
            "temperature": self.config.params.temperature,
            "messages": [{
                "role": "user",
                "content": [
                    { "type": "image_url", "image_url": { "url": req.image.data_url() } },
                    { "type": "text", "text": req.prompt },
                ],
            }],
        })
    }

    async fn call_with_retry(&self, req: &CaptionRequest) -> Result<String, CaptionError> {
        let body = self.body(req);
        let policy = self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.network_calls.fetch_add(1, Ordering::Relaxed);
            let mut builder = self.http.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.config.api_key {
                builder = builder.bearer_auth(key);
            }
            let retryable = match builder.send().await {
                Err(e) => CaptionError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                },
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let json: Value = resp
                            .json()
                            .await
                            .map_err(|e| CaptionError::BadResponse(e.to_string()))?;
                        return extract_text(&json);
                    }
                    let body = resp.text().await.unwrap_or_default();
                    let err = CaptionError::Http {
                        status: status.as_u16(),
                        attempts: attempt,
                        body,
                    };
                    if !(status.is_server_error() || status.as_u16() == 429) {
                        return Err(err);
                    }
                    err
                }
            };
            if attempt >= policy.max_attempts {
                return Err(retryable);
            }
            log::debug!("caption request attempt {attempt} failed: {retryable}");
            tokio::time::sleep(policy.delay(attempt)).await;
        }
    }
}

fn extract_text(json: &Value) -> Result<String, CaptionError> {
    let content = &json["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join("")),
        Value::Null => Err(CaptionError::BadResponse("missing choices[0].message.content".into())),
        other => Err(CaptionError::BadResponse(format!("unexpected content {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(500),
        };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(400));
        assert_eq!(p.delay(4), Duration::from_millis(500));
        assert_eq!(p.delay(60), Duration::from_millis(500));
    }

    #[test]
    fn response_shapes() {
        let s = json!({"choices":[{"message":{"content":"a cat"}}]});
        assert_eq!(extract_text(&s).unwrap(), "a cat");
        let parts = json!({"choices":[{"message":{"content":[{"type":"text","text":"a "},{"type":"text","text":"dog"}]}}]});
        assert_eq!(extract_text(&parts).unwrap(), "a dog");
        assert!(extract_text(&json!({"error":"x"})).is_err());
    }

    #[test]
    fn request_body_shape() {
        let client = CaptionClient::new(ClientConfig::new("http://localhost:1/v1/chat/completions", "llava"), None).unwrap();
        let req = CaptionRequest::new(
            ImagePayload {
                bytes: vec![1, 2, 3],
                mime: "image/png".into(),
            },
            "00",
            None,
        );
        let body = client.body(&req);
        assert_eq!(body["model"], "llava");
        assert_eq!(body["max_tokens"], 512);
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["messages"][0]["content"][0]["image_url"]["url"], "data:image/png;base64,AQID");
        assert_eq!(body["messages"][0]["content"][1]["text"], DEFAULT_PROMPT);
    }
}

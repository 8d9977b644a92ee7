// SPDX-License-Identifier: Apache-2.0

//! Precomputed image/text embeddings.
//!
//! JSONL lines: `{"id": ..., "kind": "image"|"text", "crop_j": 3, "vector": [...]}`.
//! Image lines may carry a `pattern` name when crop indices are specific to
//! one crop pattern; otherwise index `j` refers to the `j`-th crop of the
//! built-in patterns (whose crop lists are prefixes of each other).

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding `{0}` has zero norm")]
    ZeroNorm(String),
    #[error("embedding `{0}` has a non-finite entry")]
    NonFinite(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("embedding endpoint: {0}")]
    Endpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Image,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLine {
    pub id: String,
    pub kind: EmbeddingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    pub vector: Vec<f64>,
}

/// A checked vector: finite entries, nonzero norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub id: String,
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn new(id: impl Into<String>, vector: Vec<f64>) -> Result<Self, EmbeddingError> {
        let id = id.into();
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(id));
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(EmbeddingError::ZeroNorm(id));
        }
        Ok(Self { id, vector })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn norm(&self) -> f64 {
        self.vector.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

type ImageKey = (Option<String>, String, usize);

#[derive(Debug, Default, Clone)]
pub struct EmbeddingStore {
    images: HashMap<ImageKey, Embedding>,
    texts: HashMap<String, Embedding>,
}

impl EmbeddingStore {
    pub fn insert(&mut self, line: EmbeddingLine) -> Result<(), EmbeddingError> {
        match line.kind {
            EmbeddingKind::Text => {
                let e = Embedding::new(line.id.clone(), line.vector)?;
                self.texts.insert(line.id, e);
            }
            EmbeddingKind::Image => {
                let j = line.crop_j.unwrap_or(0);
                let e = Embedding::new(format!("{}#{j}", line.id), line.vector)?;
                self.images.insert((line.pattern, line.id, j), e);
            }
        }
        Ok(())
    }

    /// Embedding of crop `j` of an image (`j = 0` is the whole image).
    pub fn image(&self, image_id: &str, j: usize, pattern: Option<&str>) -> Option<&Embedding> {
        if let Some(p) = pattern {
            let key = (Some(p.to_owned()), image_id.to_owned(), j);
            if let Some(e) = self.images.get(&key) {
                return Some(e);
            }
        }
        self.images.get(&(None, image_id.to_owned(), j))
    }

    pub fn text(&self, text: &str) -> Option<&Embedding> {
        self.texts.get(text)
    }

    /// Ids of images with a whole-image embedding, in id order.
    pub fn image_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .images
            .keys()
            .filter(|(_, _, j)| *j == 0)
            .map(|(_, id, _)| id.clone())
            .collect();
        ids.sort_by(|a, b| crate::dataset::compare_ids(a, b));
        ids.dedup();
        ids
    }

    pub fn len(&self) -> usize {
        self.images.len() + self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore, EmbeddingError> {
    let mut store = EmbeddingStore::default();
    let reader = BufReader::new(File::open(path)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| EmbeddingError::Malformed { line: i + 1, message };
        let parsed: EmbeddingLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        store.insert(parsed).map_err(|e| malformed(e.to_string()))?;
    }
    Ok(store)
}

pub fn write_embedding_lines<W: Write>(lines: &[EmbeddingLine], out: &mut W) -> std::io::Result<()> {
    for l in lines {
        serde_json::to_writer(&mut *out, l)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Client for an embedding endpoint. Request body:
/// `{"model": m, "input": [{"type": "text", "text": ..}]}` or an
/// `image_url` part with a data URL; response `{"data": [{"embedding": [...]}]}`.
/// Every fetched vector is appended to a JSONL cache file that
/// [`load_embeddings`] can read back.
pub struct EmbeddingClient {
    http: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    cache_path: PathBuf,
    cache: Mutex<EmbeddingStore>,
}

impl EmbeddingClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        cache_path: impl Into<PathBuf>,
    ) -> Result<Self, EmbeddingError> {
        let cache_path = cache_path.into();
        let cache = if cache_path.exists() {
            load_embeddings(&cache_path)?
        } else {
            EmbeddingStore::default()
        };
        Ok(Self {
            http: reqwest::Client::new(),
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            cache_path,
            cache: Mutex::new(cache),
        })
    }

    pub fn store(&self) -> EmbeddingStore {
        self.cache.lock().unwrap().clone()
    }

    pub async fn text(&self, text: &str) -> Result<Embedding, EmbeddingError> {
        if let Some(e) = self.cache.lock().unwrap().text(text) {
            return Ok(e.clone());
        }
        let vector = self.fetch(json!({"type": "text", "text": text})).await?;
        self.remember(EmbeddingLine {
            id: text.to_owned(),
            kind: EmbeddingKind::Text,
            crop_j: None,
            pattern: None,
            vector: vector.clone(),
        })?;
        Embedding::new(text, vector)
    }

    pub async fn image(
        &self,
        image_id: &str,
        j: usize,
        pattern: Option<&str>,
        data_url: impl FnOnce() -> String,
    ) -> Result<Embedding, EmbeddingError> {
        if let Some(e) = self.cache.lock().unwrap().image(image_id, j, pattern) {
            return Ok(e.clone());
        }
        let vector = self
            .fetch(json!({"type": "image_url", "image_url": {"url": data_url()}}))
            .await?;
        self.remember(EmbeddingLine {
            id: image_id.to_owned(),
            kind: EmbeddingKind::Image,
            crop_j: Some(j),
            pattern: pattern.map(str::to_owned),
            vector: vector.clone(),
        })?;
        Embedding::new(format!("{image_id}#{j}"), vector)
    }

    async fn fetch(&self, part: Value) -> Result<Vec<f64>, EmbeddingError> {
        let mut req = self
            .http
            .post(&self.endpoint)
            .json(&json!({"model": self.model, "input": [part]}));
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().await.map_err(|e| EmbeddingError::Endpoint(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EmbeddingError::Endpoint(format!("HTTP {status}")));
        }
        let body: Value = resp.json().await.map_err(|e| EmbeddingError::Endpoint(e.to_string()))?;
        serde_json::from_value(body["data"][0]["embedding"].clone())
            .map_err(|_| EmbeddingError::Endpoint("missing data[0].embedding".into()))
    }

    fn remember(&self, line: EmbeddingLine) -> Result<(), EmbeddingError> {
        let mut cache = self.cache.lock().unwrap();
        let mut f = OpenOptions::new().create(true).append(true).open(&self.cache_path)?;
        write_embedding_lines(std::slice::from_ref(&line), &mut f)?;
        cache.insert(line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(Embedding::new("z", vec![0.0, 0.0]), Err(EmbeddingError::ZeroNorm(_))));
        assert!(matches!(Embedding::new("n", vec![f64::NAN]), Err(EmbeddingError::NonFinite(_))));
        assert!(Embedding::new("ok", vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn jsonl_store() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"2","kind":"image","vector":[1,0]}
{"id":"2","kind":"image","crop_j":1,"vector":[0,1]}
{"id":"2","kind":"image","crop_j":1,"pattern":"mine","vector":[1,1]}
{"id":"10","kind":"image","crop_j":0,"vector":[1,1]}
{"id":"bus","kind":"text","vector":[0.5,0.5]}
"#,
        )
        .unwrap();
        let store = load_embeddings(&path).unwrap();
        assert_eq!(store.image_ids(), ["2", "10"]);
        assert_eq!(store.image("2", 1, None).unwrap().vector, [0.0, 1.0]);
        assert_eq!(store.image("2", 1, Some("mine")).unwrap().vector, [1.0, 1.0]);
        assert_eq!(store.image("2", 1, Some("other")).unwrap().vector, [0.0, 1.0]);
        assert!(store.text("bus").is_some());
        assert!(store.image("2", 5, None).is_none());
    }

    #[test]
    fn malformed_line_numbered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"kind\":\"text\",\"vector\":[1]}\n{\"id\":\"b\",\"kind\":\"text\",\"vector\":[0]}\n").unwrap();
        assert!(matches!(load_embeddings(&path), Err(EmbeddingError::Malformed { line: 2, .. })));
    }
}

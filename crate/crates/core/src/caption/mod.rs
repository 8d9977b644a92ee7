// SPDX-License-Identifier: Apache-2.0

//! Caption documents: the text an M-LLM produced for one image and its crops.

mod cache;
mod client;
mod pipeline;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crops::{CropPattern, CropRect};

pub use cache::{CacheKey, CaptionCache};
pub use client::{CaptionClient, CaptionRequest, ClientConfig, GenerationParams, ImagePayload, RetryPolicy};
pub use pipeline::{caption_dataset, CaptionFailure, CaptionRun, Progress};

/// Prompt used for every image and crop unless overridden.
pub const DEFAULT_PROMPT: &str = "Please generate multiple captions to describe the features of this image.";

/// Alternative prompt asking for tags as well as captions.
pub const TAGS_PROMPT: &str = "Please describe the characteristics of this image with tags and captions.";

/// Follow-up prompt for features missed by a first round of captions.
pub const FOLLOW_UP_PROMPT: &str = "If there are any additional features of this image that are not expressed in the generated captions, please generate additional captions to explain them.";

/// Resolve a prompt preset name (`captions`, `tags`, `follow-up`).
pub fn prompt_preset(name: &str) -> Option<&'static str> {
    match name {
        "captions" => Some(DEFAULT_PROMPT),
        "tags" => Some(TAGS_PROMPT),
        "follow-up" => Some(FOLLOW_UP_PROMPT),
        _ => None,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CaptionError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status} after {attempts} attempt(s): {body}")]
    Http { status: u16, attempts: u32, body: String },
    #[error("endpoint returned an empty caption")]
    EmptyResponse,
    #[error("unexpected response shape: {0}")]
    BadResponse(String),
    #[error("image `{path}`: {message}")]
    Image { path: String, message: String },
    #[error(transparent)]
    Crop(#[from] crate::crops::CropError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One caption: `j = 0` is the whole image, `j ≥ 1` the `j`-th crop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionSource {
    pub j: usize,
    #[serde(default)]
    pub rect: Option<CropRect>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionDocument {
    pub image_id: String,
    pub pattern: String,
    #[serde(rename = "captions")]
    pub per_source: Vec<CaptionSource>,
}

impl CaptionDocument {
    /// Builds a document, sorting sources by crop index.
    pub fn new(image_id: impl Into<String>, pattern: impl Into<String>, mut per_source: Vec<CaptionSource>) -> Self {
        per_source.sort_by_key(|s| s.j);
        Self {
            image_id: image_id.into(),
            pattern: pattern.into(),
            per_source,
        }
    }

    /// Single-caption document with no crops.
    pub fn original_only(image_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(
            image_id,
            "none",
            vec![CaptionSource {
                j: 0,
                rect: None,
                text: text.into(),
            }],
        )
    }

    /// All caption texts in crop-index order joined by single spaces.
    pub fn concatenated(&self) -> String {
        self.per_source
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Structural checks applied when loading: ids, source order and count.
    pub fn check(&self) -> Result<(), String> {
        if self.image_id.is_empty() {
            return Err("empty image_id".into());
        }
        for (want, s) in self.per_source.iter().enumerate() {
            if s.j != want {
                return Err(format!("caption indices must run 0..N in order, found j={} at position {want}", s.j));
            }
        }
        if let Ok(p) = CropPattern::by_name(&self.pattern) {
            if self.per_source.len() != p.len() + 1 {
                return Err(format!(
                    "pattern `{}` expects {} captions, found {}",
                    self.pattern,
                    p.len() + 1,
                    self.per_source.len()
                ));
            }
        }
        Ok(())
    }
}

/// Read a captions JSONL file. Blank lines are skipped.
pub fn load_captions(path: impl AsRef<Path>) -> Result<Vec<CaptionDocument>, CaptionError> {
    let reader = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| CaptionError::Malformed { line: i + 1, message };
        let doc: CaptionDocument = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        doc.check().map_err(malformed)?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn save_captions(docs: &[CaptionDocument], path: impl AsRef<Path>) -> Result<(), CaptionError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_captions(docs, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_captions<W: Write>(docs: &[CaptionDocument], out: &mut W) -> Result<(), CaptionError> {
    for doc in docs {
        serde_json::to_writer(&mut *out, doc).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<CaptionDocument> {
        vec![
            CaptionDocument::original_only("1", "A dog on a couch."),
            CaptionDocument::new(
                "2",
                "custom",
                vec![
                    CaptionSource { j: 1, rect: Some(CropRect::new(0, 0, 5, 10)), text: "left half".into() },
                    CaptionSource { j: 0, rect: Some(CropRect::full(10, 10)), text: "whole".into() },
                ],
            ),
            CaptionDocument::original_only("3", "unicode ✓ text\nwith newline"),
        ]
    }

    #[test]
    fn concatenation_order() {
        assert_eq!(sample()[1].concatenated(), "whole left half");
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_captions(&sample(), &path).unwrap();
        assert_eq!(load_captions(&path).unwrap(), sample());
        let first = std::fs::read_to_string(&path).unwrap();
        assert!(first.starts_with(r#"{"image_id":"1","pattern":"none","captions":[{"j":0,"rect":null,"text":"A dog on a couch."}]}"#));
    }

    #[test]
    fn corrupt_line_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let good = serde_json::to_string(&sample()[0]).unwrap();
        std::fs::write(&path, format!("{good}\n{good}\n{{\"image_id\": 3,\n")).unwrap();
        match load_captions(&path) {
            Err(CaptionError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn pattern_count_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mut doc = sample()[0].clone();
        doc.pattern = "crops17".into();
        std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(matches!(load_captions(&path), Err(CaptionError::Malformed { line: 1, .. })));
    }

    #[test]
    fn empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_captions(&path).unwrap().is_empty());
    }

    #[test]
    fn presets() {
        assert_eq!(prompt_preset("captions"), Some(DEFAULT_PROMPT));
        assert!(prompt_preset("tags").unwrap().contains("tags and captions"));
        assert!(prompt_preset("nope").is_none());
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Batch captioning of a dataset: the original image plus every crop.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::client::{CaptionClient, CaptionRequest, ImagePayload};
use super::{CaptionDocument, CaptionError, CaptionSource};
use crate::crops::{crop_image, CropPattern, CropRect};
use crate::dataset::ImageRecord;

/// A request that could not be completed; the image is left out of the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionFailure {
    pub image_id: String,
    /// Crop index, or `None` when the image itself could not be read.
    pub j: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, Copy)]
pub struct Progress<'a> {
    pub done: usize,
    pub total: usize,
    pub image_id: &'a str,
    pub ok: bool,
}

#[derive(Debug, Default)]
pub struct CaptionRun {
    /// Completed documents in dataset order.
    pub documents: Vec<CaptionDocument>,
    pub failures: Vec<CaptionFailure>,
}

fn resolve(root: Option<&Path>, path: &str) -> PathBuf {
    match root {
        Some(r) => r.join(path),
        None => PathBuf::from(path),
    }
}

fn mime_of(bytes: &[u8]) -> String {
    image::guess_format(bytes)
        .map(|f| f.to_mime_type().to_owned())
        .unwrap_or_else(|_| "application/octet-stream".into())
}

fn encode_png(img: &DynamicImage) -> Result<Vec<u8>, image::ImageError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Caption every record. Cached responses are reused, so a completed run
/// repeated with the same cache performs no network calls.
pub async fn caption_dataset(
    records: &[ImageRecord],
    pattern: &CropPattern,
    client: &CaptionClient,
    prompt: &str,
    image_root: Option<&Path>,
    concurrency: usize,
    progress: &(dyn Fn(Progress<'_>) + Sync),
) -> CaptionRun {
    let mut run = CaptionRun::default();
    let total = records.len();
    for (n, record) in records.iter().enumerate() {
        let result = caption_one(record, pattern, client, prompt, image_root, concurrency.max(1)).await;
        let ok = match result {
            Ok(doc) => {
                run.documents.push(doc);
                true
            }
            Err(mut fails) => {
                for f in &fails {
                    log::warn!("image {} crop {:?}: {}", f.image_id, f.j, f.error);
                }
                run.failures.append(&mut fails);
                false
            }
        };
        progress(Progress {
            done: n + 1,
            total,
            image_id: &record.image_id,
            ok,
        });
    }
    run
}

async fn caption_one(
    record: &ImageRecord,
    pattern: &CropPattern,
    client: &CaptionClient,
    prompt: &str,
    image_root: Option<&Path>,
    concurrency: usize,
) -> Result<CaptionDocument, Vec<CaptionFailure>> {
    let fail = |j: Option<usize>, e: &dyn std::fmt::Display| {
        vec![CaptionFailure {
            image_id: record.image_id.clone(),
            j,
            error: e.to_string(),
        }]
    };
    let path = resolve(image_root, &record.path);
    let bytes = std::fs::read(&path).map_err(|e| fail(None, &e))?;
    let sha = hex::encode(Sha256::digest(&bytes));

    let rects: Vec<Option<CropRect>> = if pattern.is_empty() {
        vec![None]
    } else {
        let (w, h) = image::ImageReader::new(Cursor::new(&bytes))
            .with_guessed_format()
            .map_err(|e| fail(None, &e))?
            .into_dimensions()
            .map_err(|e| fail(None, &e))?;
        let crops = pattern.generate(w, h).map_err(|e| fail(None, &e))?;
        std::iter::once(None).chain(crops.into_iter().map(Some)).collect()
    };

    // Fast path: everything cached, no decoding needed.
    let cached: Vec<Option<String>> = rects
        .iter()
        .map(|&r| client.cached(&client.cache_key(&sha, r, prompt)))
        .collect();
    if cached.iter().all(Option::is_some) {
        return Ok(assemble(record, pattern, &rects, cached.into_iter().flatten().collect()));
    }

    let decoded = if pattern.is_empty() {
        None
    } else {
        Some(image::load_from_memory(&bytes).map_err(|e| fail(None, &e))?)
    };
    let mut requests = Vec::with_capacity(rects.len());
    for (j, &rect) in rects.iter().enumerate() {
        if cached[j].is_some() {
            continue;
        }
        let payload = match (rect, &decoded) {
            (Some(r), Some(img)) => {
                let tile = crop_image(img, r).map_err(|e| fail(Some(j), &e))?;
                ImagePayload {
                    bytes: encode_png(&tile).map_err(|e| fail(Some(j), &e))?,
                    mime: "image/png".into(),
                }
            }
            _ => ImagePayload {
                bytes: bytes.clone(),
                mime: mime_of(&bytes),
            },
        };
        let mut req = CaptionRequest::new(payload, sha.clone(), rect);
        req.prompt = prompt.to_owned();
        requests.push((j, req));
    }

    let responses: Vec<(usize, Result<String, CaptionError>)> = stream::iter(requests)
        .map(|(j, req)| async move { (j, client.request_captions(&req).await) })
        .buffer_unordered(concurrency)
        .collect()
        .await;

    let mut texts = cached;
    let mut failures = Vec::new();
    for (j, res) in responses {
        match res {
            Ok(text) => texts[j] = Some(text),
            Err(e) => failures.push(CaptionFailure {
                image_id: record.image_id.clone(),
                j: Some(j),
                error: e.to_string(),
            }),
        }
    }
    if !failures.is_empty() {
        failures.sort_by_key(|f| f.j);
        return Err(failures);
    }
    Ok(assemble(record, pattern, &rects, texts.into_iter().flatten().collect()))
}

fn assemble(record: &ImageRecord, pattern: &CropPattern, rects: &[Option<CropRect>], texts: Vec<String>) -> CaptionDocument {
    let sources = rects
        .iter()
        .zip(texts)
        .enumerate()
        .map(|(j, (&rect, text))| CaptionSource { j, rect, text })
        .collect();
    CaptionDocument::new(record.image_id.clone(), pattern.name.clone(), sources)
}

// SPDX-License-Identifier: Apache-2.0

//! CLIPScore and its averages over crop patterns.
//!
//! `CLIPScore(I, T) = w · max(cos(E_I, E_T), 0)`. The per-image average runs
//! over the original image and its `N_C` crops against all `N_T` texts; the
//! dataset average is the mean of the per-image averages. Sweeping those
//! averages over crop patterns locates the point where more crops stop
//! helping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crops::CropPattern;
use crate::embeddings::{Embedding, EmbeddingError, EmbeddingStore};

#[derive(Debug, thiserror::Error)]
pub enum ClipScoreError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("cannot average an empty list of {0}")]
    Empty(&'static str),
    #[error("missing embedding for image `{image_id}` crop {j} (pattern `{pattern}`)")]
    MissingImage { image_id: String, j: usize, pattern: String },
    #[error("missing embedding for text `{0}`")]
    MissingText(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipScoreConfig {
    pub w: f64,
}

impl Default for ClipScoreConfig {
    fn default() -> Self {
        Self { w: 2.5 }
    }
}

pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 {
        return Err(EmbeddingError::ZeroNorm(a.id.clone()));
    }
    if nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm(b.id.clone()));
    }
    let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
    // Rounding can push |cos| a hair past 1.
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn clip_score(image: &Embedding, text: &Embedding, cfg: ClipScoreConfig) -> Result<f64, EmbeddingError> {
    Ok(cfg.w * cosine(image, text)?.max(0.0))
}

/// Mean CLIPScore over every (image-or-crop, text) pair, summed in `j`, `k` order.
pub fn averaged_clipscore_each(
    images: &[&Embedding],
    texts: &[&Embedding],
    cfg: ClipScoreConfig,
) -> Result<f64, ClipScoreError> {
    if images.is_empty() {
        return Err(ClipScoreError::Empty("images"));
    }
    if texts.is_empty() {
        return Err(ClipScoreError::Empty("texts"));
    }
    let mut sum = 0.0;
    for img in images {
        for txt in texts {
            sum += clip_score(img, txt, cfg)?;
        }
    }
    Ok(sum / (images.len() * texts.len()) as f64)
}

pub fn averaged_clipscore_all(per_image: &[f64]) -> Result<f64, ClipScoreError> {
    if per_image.is_empty() {
        return Err(ClipScoreError::Empty("per-image scores"));
    }
    Ok(per_image.iter().sum::<f64>() / per_image.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub pattern: String,
    /// `N_C + 1`: crops plus the original.
    pub images_per_original: usize,
    pub averaged_clipscore: f64,
    /// Per-image averages in dataset order.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_image: Vec<(String, f64)>,
}

impl SweepEntry {
    /// Per-image averages, highest first.
    pub fn per_image_descending(&self) -> Vec<(String, f64)> {
        let mut v = self.per_image.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropScoreSweep {
    /// Ordered by ascending `images_per_original`.
    pub entries: Vec<SweepEntry>,
    pub selected: String,
    pub epsilon: f64,
}

/// Index of the smallest pattern whose successor gains less than `epsilon`;
/// the last one when gains never drop below it. `scores` must be ordered.
pub fn select_saturation(scores: &[f64], epsilon: f64) -> Option<usize> {
    if scores.is_empty() {
        return None;
    }
    Some(
        scores
            .windows(2)
            .position(|w| w[1] - w[0] < epsilon)
            .unwrap_or(scores.len() - 1),
    )
}

/// Build a sweep from precomputed `(pattern, images_per_original, score)` rows.
pub fn sweep_from_scores(mut entries: Vec<SweepEntry>, epsilon: f64) -> CropScoreSweep {
    entries.sort_by_key(|e| e.images_per_original);
    let scores: Vec<f64> = entries.iter().map(|e| e.averaged_clipscore).collect();
    let selected = select_saturation(&scores, epsilon)
        .map(|i| entries[i].pattern.clone())
        .unwrap_or_default();
    CropScoreSweep {
        entries,
        selected,
        epsilon,
    }
}

/// Averaged CLIPScore of every pattern over `image_ids` against `texts`.
pub fn sweep_patterns(
    image_ids: &[String],
    patterns: &[CropPattern],
    texts: &[String],
    store: &EmbeddingStore,
    cfg: ClipScoreConfig,
    epsilon: f64,
) -> Result<CropScoreSweep, ClipScoreError> {
    let text_embs: Vec<&Embedding> = texts
        .iter()
        .map(|t| store.text(t).ok_or_else(|| ClipScoreError::MissingText(t.clone())))
        .collect::<Result<_, _>>()?;

    let mut entries = Vec::with_capacity(patterns.len());
    for pattern in patterns {
        let count = pattern.len() + 1;
        let per_image: Vec<(String, f64)> = image_ids
            .par_iter()
            .map(|id| {
                let imgs: Vec<&Embedding> = (0..count)
                    .map(|j| {
                        store.image(id, j, Some(&pattern.name)).ok_or_else(|| ClipScoreError::MissingImage {
                            image_id: id.clone(),
                            j,
                            pattern: pattern.name.clone(),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                Ok((id.clone(), averaged_clipscore_each(&imgs, &text_embs, cfg)?))
            })
            .collect::<Result<_, ClipScoreError>>()?;
        let scores: Vec<f64> = per_image.iter().map(|(_, s)| *s).collect();
        entries.push(SweepEntry {
            pattern: pattern.name.clone(),
            images_per_original: count,
            averaged_clipscore: averaged_clipscore_all(&scores)?,
            per_image,
        });
    }
    Ok(sweep_from_scores(entries, epsilon))
}

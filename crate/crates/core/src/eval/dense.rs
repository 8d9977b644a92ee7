// SPDX-License-Identifier: Apache-2.0

use crate::clipscore::cosine;
use crate::embeddings::{Embedding, EmbeddingStore};

use super::{EvalError, Retriever};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHit {
    pub index: usize,
    pub score: f64,
}

/// Top `k` images by cosine similarity to `query`; ties go to the lower id.
pub fn dense_search(query: &Embedding, images: &[Embedding], k: usize) -> Result<Vec<DenseHit>, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidK);
    }
    let mut hits = images
        .iter()
        .enumerate()
        .map(|(index, img)| Ok(DenseHit { index, score: cosine(query, img)? }))
        .collect::<Result<Vec<_>, EvalError>>()?;
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| crate::dataset::compare_ids(&images[a.index].id, &images[b.index].id))
    });
    hits.truncate(k);
    Ok(hits)
}

/// Cosine retrieval over whole-image embeddings, with query texts looked up
/// in a store of precomputed text embeddings.
pub struct DenseRetriever {
    ids: Vec<String>,
    images: Vec<Embedding>,
    store: EmbeddingStore,
}

impl DenseRetriever {
    pub fn new(store: EmbeddingStore) -> Self {
        let ids = store.image_ids();
        let images = ids
            .iter()
            .map(|id| {
                let e = store.image(id, 0, None).expect("listed ids have a whole-image embedding");
                Embedding { id: id.clone(), vector: e.vector.clone() }
            })
            .collect();
        Self { ids, images, store }
    }
}

impl Retriever for DenseRetriever {
    fn name(&self) -> &str {
        "dense"
    }

    fn corpus(&self) -> &[String] {
        &self.ids
    }

    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<u32>, EvalError> {
        let q = self
            .store
            .text(query)
            .ok_or_else(|| EvalError::MissingQueryEmbedding(query.to_owned()))?;
        Ok(dense_search(q, &self.images, k)?.into_iter().map(|h| h.index as u32).collect())
    }
}

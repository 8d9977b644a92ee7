// SPDX-License-Identifier: Apache-2.0

//! BM25-scored inverted index over caption documents.
//!
//! Scoring follows Lucene's BM25 (the variant without the `(k1 + 1)`
//! numerator) with exact document lengths:
//!
//! ```text
//! score(q, d) = Σ_{t ∈ unique(q)} idf(t) · tf / (tf + k1 · (1 − b + b · dl / avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```

mod persist;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{tokenize, AnalyzerConfig, TermSequence};
use crate::caption::CaptionDocument;

pub use persist::{load_index, save_index, FORMAT_MAGIC, FORMAT_VERSION};

/// Dense document number assigned in input order.
pub type DocId = u32;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("duplicate document id `{0}`")]
    DuplicateDoc(String),
    #[error("cannot build an index from zero documents")]
    EmptyCorpus,
    #[error("unknown document {0}")]
    UnknownDoc(DocId),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid BM25 parameters: k1={k1}, b={b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("not an index file: {0}")]
    Format(String),
    #[error("unsupported index format version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("index file is truncated")]
    Truncated,
    #[error("index checksum mismatch (stored {stored}, computed {computed})")]
    Checksum { stored: String, computed: String },
    #[error("index file is inconsistent: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, IndexError> {
        if !(k1 >= 0.0 && k1.is_finite() && (0.0..=1.0).contains(&b)) {
            return Err(IndexError::InvalidParams { k1, b });
        }
        Ok(Self { k1, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: DocId,
    pub tf: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub doc: DocId,
    pub score: f64,
}

/// Top-k hits, best first. Ties are broken by ascending doc id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResult {
    pub hits: Vec<Hit>,
    pub query_terms: TermSequence,
    /// Number of documents with a positive score before truncation to k.
    pub total_hits: usize,
}

impl RankedResult {
    pub fn docs(&self) -> impl Iterator<Item = DocId> + '_ {
        self.hits.iter().map(|h| h.doc)
    }
}

/// Orders hits by descending score, then ascending doc id.
pub fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.doc.cmp(&b.doc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    analyzer: AnalyzerConfig,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_len: Vec<u32>,
    doc_ids: Vec<String>,
    id_lookup: HashMap<String, DocId>,
    avgdl: f64,
}

impl InvertedIndex {
    /// Index the concatenated captions of every document.
    pub fn build(docs: &[CaptionDocument], analyzer: AnalyzerConfig) -> Result<Self, IndexError> {
        let texts: Vec<(String, String)> = docs
            .iter()
            .map(|d| (d.image_id.clone(), d.concatenated()))
            .collect();
        Self::build_from_texts(&texts, analyzer)
    }

    /// Index `(id, text)` pairs; doc ids follow the input order.
    pub fn build_from_texts<S: AsRef<str> + Sync, T: AsRef<str> + Sync>(
        docs: &[(S, T)],
        analyzer: AnalyzerConfig,
    ) -> Result<Self, IndexError> {
        if docs.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let mut id_lookup = HashMap::with_capacity(docs.len());
        for (i, (id, _)) in docs.iter().enumerate() {
            let id = id.as_ref();
            if id_lookup.insert(id.to_owned(), i as DocId).is_some() {
                return Err(IndexError::DuplicateDoc(id.to_owned()));
            }
        }

        let analyzed: Vec<TermSequence> = docs
            .par_iter()
            .map(|(_, text)| tokenize(text.as_ref(), &analyzer))
            .collect();

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (doc, terms) in analyzed.iter().enumerate() {
            doc_len.push(terms.len() as u32);
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for t in terms.iter() {
                *counts.entry(t).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term.to_owned()).or_default().push(Posting {
                    doc: doc as DocId,
                    tf,
                });
            }
        }

        let doc_ids = docs.iter().map(|(id, _)| id.as_ref().to_owned()).collect();
        Ok(Self::from_parts(analyzer, postings, doc_len, doc_ids, id_lookup))
    }

    fn from_parts(
        analyzer: AnalyzerConfig,
        postings: BTreeMap<String, Vec<Posting>>,
        doc_len: Vec<u32>,
        doc_ids: Vec<String>,
        id_lookup: HashMap<String, DocId>,
    ) -> Self {
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avgdl = if doc_len.is_empty() {
            0.0
        } else {
            total as f64 / doc_len.len() as f64
        };
        Self {
            analyzer,
            postings,
            doc_len,
            doc_ids,
            id_lookup,
            avgdl,
        }
    }

    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    pub fn n_docs(&self) -> usize {
        self.doc_len.len()
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn total_tokens(&self) -> u64 {
        self.doc_len.iter().map(|&l| u64::from(l)).sum()
    }

    pub fn doc_len(&self, doc: DocId) -> Option<u32> {
        self.doc_len.get(doc as usize).copied()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    /// External (image) id of a document.
    pub fn image_id(&self, doc: DocId) -> Option<&str> {
        self.doc_ids.get(doc as usize).map(String::as_str)
    }

    pub fn image_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_for(&self, image_id: &str) -> Option<DocId> {
        self.id_lookup.get(image_id).copied()
    }

    /// Term frequency of `term` in `doc` (0 when absent).
    pub fn term_freq(&self, term: &str, doc: DocId) -> u32 {
        self.postings
            .get(term)
            .and_then(|p| p.binary_search_by_key(&doc, |e| e.doc).ok().map(|i| p[i].tf))
            .unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.n_docs(), self.doc_freq(term))
    }

    pub fn analyze(&self, text: &str) -> TermSequence {
        tokenize(text, &self.analyzer)
    }

    pub fn bm25_score(&self, query: &TermSequence, doc: DocId) -> Result<f64, IndexError> {
        self.bm25_score_with(query, doc, Bm25Params::default())
    }

    pub fn bm25_score_with(
        &self,
        query: &TermSequence,
        doc: DocId,
        params: Bm25Params,
    ) -> Result<f64, IndexError> {
        let dl = self.doc_len(doc).ok_or(IndexError::UnknownDoc(doc))?;
        let norm = self.length_norm(dl, params);
        Ok(query
            .unique()
            .into_iter()
            .map(|t| {
                let tf = self.term_freq(t, doc);
                if tf == 0 {
                    0.0
                } else {
                    self.idf(t) * tf_part(tf, norm)
                }
            })
            .sum())
    }

    fn length_norm(&self, dl: u32, params: Bm25Params) -> f64 {
        // avgdl is zero only when every document is empty; such a corpus
        // has no postings, so the value is never used for scoring.
        let ratio = if self.avgdl > 0.0 {
            f64::from(dl) / self.avgdl
        } else {
            0.0
        };
        params.k1 * (1.0 - params.b + params.b * ratio)
    }

    pub fn search(&self, query_text: &str, k: usize) -> Result<RankedResult, IndexError> {
        self.search_terms(self.analyze(query_text), k, Bm25Params::default())
    }

    /// Score every document that shares a term with `query` and keep the best `k`.
    pub fn search_terms(
        &self,
        query: TermSequence,
        k: usize,
        params: Bm25Params,
    ) -> Result<RankedResult, IndexError> {
        if k < 1 {
            return Err(IndexError::InvalidK);
        }
        let mut acc = vec![0.0f64; self.n_docs()];
        let mut touched = Vec::new();
        for term in query.unique() {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let w = idf(self.n_docs(), list.len());
            for p in list {
                let slot = &mut acc[p.doc as usize];
                if *slot == 0.0 {
                    touched.push(p.doc);
                }
                *slot += w * tf_part(p.tf, self.length_norm(self.doc_len[p.doc as usize], params));
            }
        }

        let mut hits: Vec<Hit> = touched
            .into_iter()
            .map(|doc| Hit {
                doc,
                score: acc[doc as usize],
            })
            .filter(|h| h.score > 0.0)
            .collect();
        let total_hits = hits.len();
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, rank_order);
            hits.truncate(k);
        }
        hits.sort_by(rank_order);
        Ok(RankedResult {
            hits,
            query_terms: query,
            total_hits,
        })
    }

    /// Check the structural invariants; used after loading from disk.
    pub fn validate(&self) -> Result<(), IndexError> {
        let n = self.n_docs();
        if self.doc_ids.len() != n {
            return Err(IndexError::Corrupt("doc_meta and doc_len differ in length".into()));
        }
        let mut sums = vec![0u64; n];
        for (term, list) in &self.postings {
            if term.is_empty() {
                return Err(IndexError::Corrupt("empty term".into()));
            }
            if list.is_empty() || list.len() > n {
                return Err(IndexError::Corrupt(format!("bad document frequency for `{term}`")));
            }
            for w in list.windows(2) {
                if w[0].doc >= w[1].doc {
                    return Err(IndexError::Corrupt(format!("unsorted postings for `{term}`")));
                }
            }
            for p in list {
                if p.doc as usize >= n || p.tf == 0 {
                    return Err(IndexError::Corrupt(format!("bad posting for `{term}`")));
                }
                sums[p.doc as usize] += u64::from(p.tf);
            }
        }
        for (doc, (&len, sum)) in self.doc_len.iter().zip(sums).enumerate() {
            if u64::from(len) != sum {
                return Err(IndexError::Corrupt(format!(
                    "document {doc} length {len} disagrees with postings ({sum})"
                )));
            }
        }
        Ok(())
    }
}

/// Lucene BM25 idf; always positive since `df <= n`.
pub fn idf(n: usize, df: usize) -> f64 {
    let (n, df) = (n as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn tf_part(tf: u32, norm: f64) -> f64 {
    let tf = f64::from(tf);
    tf / (tf + norm)
}

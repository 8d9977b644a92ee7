// SPDX-License-Identifier: Apache-2.0

//! Lexical image retrieval over M-LLM captions.
//!
//! Images are captioned (whole image plus optional crops) by a vision
//! language model, the captions are analyzed into terms and indexed with
//! BM25, and retrieval quality is measured with keyword, multi-keyword,
//! caption and feedback scenarios. CLIPScore helpers pick a crop pattern.

pub mod analysis;
pub mod caption;
pub mod clipscore;
pub mod crops;
pub mod dataset;
pub mod embeddings;
pub mod eval;
pub mod index;
pub mod query;
pub mod service;

pub use analysis::{tokenize, AnalyzerConfig, TermSequence};
pub use caption::CaptionDocument;
pub use crops::{CropPattern, CropRect};
pub use dataset::{Dataset, ImageRecord};
pub use index::{Bm25Params, InvertedIndex, RankedResult};
pub use query::compose_query;

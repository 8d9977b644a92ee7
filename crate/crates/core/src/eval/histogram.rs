// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use crate::analysis::{tokenize, AnalyzerConfig};

pub const DEFAULT_TOP_N: usize = 15;

/// The `top_n` most frequent terms over all documents, by count descending
/// and then lexicographically.
pub fn term_histogram<S: AsRef<str>>(docs: &[S], top_n: usize, analyzer: &AnalyzerConfig) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for doc in docs {
        for term in tokenize(doc.as_ref(), analyzer).iter() {
            *counts.entry(term.to_owned()).or_default() += 1;
        }
    }
    let mut counts: Vec<(String, usize)> = counts.into_iter().collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    counts.truncate(top_n);
    counts
}

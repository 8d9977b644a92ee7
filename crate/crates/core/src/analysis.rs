// SPDX-License-Identifier: Apache-2.0

//! Text analysis: turns captions and queries into term sequences.
//!
//! The chain is fixed: optional lowercasing, splitting on every
//! non-alphanumeric character, optional stopword removal and optional
//! stemming (Snowball English). The configuration is stored in the index
//! header so that queries are always analyzed exactly like the documents.

use std::collections::HashSet;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

const ENGLISH_STOPWORDS_V1: &str = include_str!("../resources/stopwords_en_v1.txt");

/// Rule used to cut text into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenSplit {
    /// Every character that is not alphabetic or numeric is a separator.
    #[serde(rename = "non-alphanumeric")]
    NonAlphanumeric,
}

/// Named stopword list bundled with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopwordList {
    #[serde(rename = "none")]
    None,
    /// The 33-word English list from `resources/stopwords_en_v1.txt`.
    #[serde(rename = "english_v1")]
    EnglishV1,
}

impl StopwordList {
    pub fn words(self) -> &'static HashSet<&'static str> {
        static EMPTY: OnceLock<HashSet<&'static str>> = OnceLock::new();
        static ENGLISH: OnceLock<HashSet<&'static str>> = OnceLock::new();
        match self {
            StopwordList::None => EMPTY.get_or_init(HashSet::new),
            StopwordList::EnglishV1 => ENGLISH.get_or_init(|| {
                ENGLISH_STOPWORDS_V1
                    .lines()
                    .map(str::trim)
                    .filter(|w| !w.is_empty())
                    .collect()
            }),
        }
    }

    pub fn contains(self, term: &str) -> bool {
        self.words().contains(term)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
    pub token_split: TokenSplit,
    /// Snowball English stemming.
    pub stemming: bool,
    pub stopwords: StopwordList,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            token_split: TokenSplit::NonAlphanumeric,
            stemming: true,
            stopwords: StopwordList::EnglishV1,
        }
    }
}

impl AnalyzerConfig {
    /// Lowercase and split only.
    pub fn plain() -> Self {
        Self {
            lowercase: true,
            token_split: TokenSplit::NonAlphanumeric,
            stemming: false,
            stopwords: StopwordList::None,
        }
    }

    /// Default chain without stemming, so that counted words stay readable.
    pub fn display() -> Self {
        Self {
            stemming: false,
            ..Self::default()
        }
    }
}

/// Ordered output of [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermSequence {
    pub terms: Vec<String>,
}

impl TermSequence {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    /// Terms in first-occurrence order with repeats removed.
    pub fn unique(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.iter().filter(|t| seen.insert(*t)).collect()
    }

    pub fn join(&self, sep: &str) -> String {
        self.terms.join(sep)
    }
}

impl From<Vec<String>> for TermSequence {
    fn from(terms: Vec<String>) -> Self {
        Self { terms }
    }
}

impl<'a> FromIterator<&'a str> for TermSequence {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        Self {
            terms: iter.into_iter().map(str::to_owned).collect(),
        }
    }
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Analyze `text` into terms. Pure; empty input gives an empty sequence.
pub fn tokenize(text: &str, config: &AnalyzerConfig) -> TermSequence {
    // Lowercasing happens before splitting: some lowercase mappings expand
    // into combining marks, which must be treated as separators too.
    let folded;
    let text = if config.lowercase {
        folded = text.to_lowercase();
        folded.as_str()
    } else {
        text
    };

    let stop = config.stopwords;
    let mut terms = Vec::new();
    for raw in text.split(|c: char| !c.is_alphanumeric()) {
        if raw.is_empty() || stop.contains(raw) {
            continue;
        }
        let term = if config.stemming {
            stemmer().stem(raw).into_owned()
        } else {
            raw.to_owned()
        };
        if term.is_empty() || stop.contains(&term) {
            continue;
        }
        terms.push(term);
    }
    TermSequence { terms }
}

// SPDX-License-Identifier: Apache-2.0

//! JSON container for [`InvertedIndex`].
//!
//! Keys are written in sorted order and floats with shortest round-trip
//! formatting, so the same index always serializes to the same bytes. The
//! `checksum` field is the SHA-256 of the compact serialization of every
//! other field.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::{DocId, IndexError, InvertedIndex, Posting};
use crate::analysis::AnalyzerConfig;

pub const FORMAT_MAGIC: &str = "lexret-index";
pub const FORMAT_VERSION: u64 = 1;

fn checksum(payload: &Map<String, Value>) -> String {
    let bytes = serde_json::to_vec(payload).expect("json map serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub(crate) fn to_bytes(index: &InvertedIndex) -> Vec<u8> {
    let postings: Map<String, Value> = index
        .postings
        .iter()
        .map(|(term, list)| {
            let pairs = list.iter().map(|p| json!([p.doc, p.tf])).collect();
            (term.clone(), Value::Array(pairs))
        })
        .collect();

    let mut payload = Map::new();
    payload.insert("analyzer".into(), serde_json::to_value(index.analyzer).unwrap());
    payload.insert("avgdl".into(), json!(index.avgdl));
    payload.insert("doc_len".into(), json!(index.doc_len));
    payload.insert("doc_meta".into(), json!(index.doc_ids));
    payload.insert("format".into(), json!(FORMAT_MAGIC));
    payload.insert("n_docs".into(), json!(index.n_docs()));
    payload.insert("postings".into(), Value::Object(postings));
    payload.insert("version".into(), json!(FORMAT_VERSION));
    let sum = checksum(&payload);
    payload.insert("checksum".into(), json!(sum));

    let mut out = serde_json::to_vec(&payload).unwrap();
    out.push(b'\n');
    out
}

pub fn save_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    fs::write(path, to_bytes(index))?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex, IndexError> {
    from_bytes(&fs::read(path)?)
}

fn field<'a>(map: &'a Map<String, Value>, key: &str) -> Result<&'a Value, IndexError> {
    map.get(key)
        .ok_or_else(|| IndexError::Corrupt(format!("missing field `{key}`")))
}

fn bad(what: &str) -> IndexError {
    IndexError::Corrupt(format!("malformed field `{what}`"))
}

pub(crate) fn from_bytes(bytes: &[u8]) -> Result<InvertedIndex, IndexError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| {
        if e.is_eof() {
            IndexError::Truncated
        } else {
            IndexError::Format(e.to_string())
        }
    })?;
    let Value::Object(mut map) = value else {
        return Err(IndexError::Format("top level is not an object".into()));
    };
    match map.get("format").and_then(Value::as_str) {
        Some(FORMAT_MAGIC) => {}
        _ => return Err(IndexError::Format(format!("missing `{FORMAT_MAGIC}` marker"))),
    }
    let version = field(&map, "version")?.as_u64().ok_or_else(|| bad("version"))?;
    if version != FORMAT_VERSION {
        return Err(IndexError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let stored = match map.remove("checksum") {
        Some(Value::String(s)) => s,
        _ => return Err(bad("checksum")),
    };
    let computed = checksum(&map);
    if stored != computed {
        return Err(IndexError::Checksum { stored, computed });
    }

    let analyzer: AnalyzerConfig =
        serde_json::from_value(field(&map, "analyzer")?.clone()).map_err(|_| bad("analyzer"))?;
    let doc_len: Vec<u32> =
        serde_json::from_value(field(&map, "doc_len")?.clone()).map_err(|_| bad("doc_len"))?;
    let doc_ids: Vec<String> =
        serde_json::from_value(field(&map, "doc_meta")?.clone()).map_err(|_| bad("doc_meta"))?;
    let n_docs = field(&map, "n_docs")?.as_u64().ok_or_else(|| bad("n_docs"))?;
    if n_docs as usize != doc_len.len() {
        return Err(IndexError::Corrupt("n_docs disagrees with doc_len".into()));
    }

    let raw: BTreeMap<String, Vec<(DocId, u32)>> =
        serde_json::from_value(field(&map, "postings")?.clone()).map_err(|_| bad("postings"))?;
    let postings = raw
        .into_iter()
        .map(|(t, list)| {
            let list = list.into_iter().map(|(doc, tf)| Posting { doc, tf }).collect();
            (t, list)
        })
        .collect();

    let mut id_lookup = HashMap::with_capacity(doc_ids.len());
    for (i, id) in doc_ids.iter().enumerate() {
        if id_lookup.insert(id.clone(), i as DocId).is_some() {
            return Err(IndexError::DuplicateDoc(id.clone()));
        }
    }
    let index = InvertedIndex::from_parts(analyzer, postings, doc_len, doc_ids, id_lookup);
    let stored_avgdl = field(&map, "avgdl")?.as_f64().ok_or_else(|| bad("avgdl"))?;
    if (stored_avgdl - index.avgdl).abs() > 1e-9 {
        return Err(IndexError::Corrupt("avgdl disagrees with doc_len".into()));
    }
    index.validate()?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::StopwordList;

    fn toy(analyzer: AnalyzerConfig) -> InvertedIndex {
        InvertedIndex::build_from_texts(
            &[("d1", "red apple"), ("d2", "green apple apple"), ("d3", "banana")],
            analyzer,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_and_layout() {
        let idx = toy(AnalyzerConfig::plain());
        let bytes = to_bytes(&idx);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, idx);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with(r#"{"analyzer":"#));
        assert!(text.contains(r#""postings":{"apple":[[0,1],[1,2]],"banana":[[2,1]]"#));
    }

    #[test]
    fn byte_identical_rebuild() {
        assert_eq!(to_bytes(&toy(AnalyzerConfig::default())), to_bytes(&toy(AnalyzerConfig::default())));
    }

    #[test]
    fn wrong_magic() {
        assert!(matches!(from_bytes(b"PK\x03\x04garbage"), Err(IndexError::Format(_))));
        assert!(matches!(from_bytes(br#"{"format":"other"}"#), Err(IndexError::Format(_))));
        assert!(matches!(from_bytes(b"[1,2]"), Err(IndexError::Format(_))));
    }

    #[test]
    fn truncated() {
        let bytes = to_bytes(&toy(AnalyzerConfig::plain()));
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(from_bytes(cut), Err(IndexError::Truncated)));
    }

    #[test]
    fn version_mismatch() {
        let bytes = to_bytes(&toy(AnalyzerConfig::plain()));
        let text = String::from_utf8(bytes).unwrap().replace(r#""version":1"#, r#""version":9"#);
        assert!(matches!(
            from_bytes(text.as_bytes()),
            Err(IndexError::Version { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn checksum_failure() {
        let bytes = to_bytes(&toy(AnalyzerConfig::plain()));
        let text = String::from_utf8(bytes).unwrap().replace("[[2,1]]", "[[2,2]]");
        assert!(matches!(from_bytes(text.as_bytes()), Err(IndexError::Checksum { .. })));
    }

    #[test]
    fn analyzer_travels_with_file() {
        let cfg = AnalyzerConfig {
            stemming: false,
            stopwords: StopwordList::EnglishV1,
            ..AnalyzerConfig::plain()
        };
        let idx = InvertedIndex::build_from_texts(&[("a", "The apples"), ("b", "an apple")], cfg).unwrap();
        let back = from_bytes(&to_bytes(&idx)).unwrap();
        assert_eq!(*back.analyzer(), cfg);
        // Unstemmed: "apples" only matches the first doc.
        let r = back.search("APPLES", 5).unwrap();
        assert_eq!(r.docs().collect::<Vec<_>>(), [0]);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Evaluation datasets: a generic JSONL format and an MS-COCO loader.
//!
//! Generic lines look like
//! `{"image_id": "...", "path": "...", "labels": [...], "captions": [...]}`.
//! PASCAL VOC or NUS-WIDE splits are consumed after conversion to this form.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate image id `{0}`")]
    DuplicateId(String),
    #[error("annotation for image {image_id} references unknown category {category_id}")]
    MissingCategory { image_id: u64, category_id: u64 },
    #[error("annotation references unknown image {0}")]
    UnknownImage(u64),
    #[error("cannot parse `{path}`: {message}")]
    Json { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    #[serde(default)]
    pub path: String,
    /// Ground-truth labels in annotation order, without repeats.
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub captions: Vec<String>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, labels: &[&str], captions: &[&str]) -> Self {
        Self {
            image_id: image_id.into(),
            path: String::new(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            captions: captions.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn is_labeled(&self) -> bool {
        !self.labels.is_empty()
    }

    pub fn first_caption(&self) -> Option<&str> {
        self.captions.first().map(String::as_str)
    }
}

/// Numeric ids compare numerically, everything else lexicographically.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub images: usize,
    pub labeled: usize,
    pub label_types: usize,
    pub with_captions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<ImageRecord>,
    vocabulary: BTreeSet<String>,
}

impl Dataset {
    /// Validates ids, removes repeated labels and sorts records by id.
    pub fn new(mut records: Vec<ImageRecord>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &mut records {
            if !seen.insert(r.image_id.clone()) {
                return Err(DatasetError::DuplicateId(r.image_id.clone()));
            }
            let mut labels = HashSet::new();
            r.labels.retain(|l| labels.insert(l.clone()));
        }
        records.sort_by(|a, b| compare_ids(&a.image_id, &b.image_id));
        let vocabulary = records.iter().flat_map(|r| r.labels.iter().cloned()).collect();
        Ok(Self { records, vocabulary })
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn label_vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.records
            .binary_search_by(|r| compare_ids(&r.image_id, image_id))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Records kept in the dataset but carrying no labels.
    pub fn unlabeled(&self) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(|r| !r.is_labeled())
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            images: self.records.len(),
            labeled: self.records.iter().filter(|r| r.is_labeled()).count(),
            label_types: self.vocabulary.len(),
            with_captions: self.records.iter().filter(|r| !r.captions.is_empty()).count(),
        }
    }
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ImageRecord = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Dataset::new(records)
}

pub fn save_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut out = String::new();
    for r in dataset.records() {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    #[serde(default)]
    file_name: String,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    #[serde(default)]
    category_id: Option<u64>,
    #[serde(default)]
    caption: Option<String>,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Deserialize)]
struct CocoFile {
    #[serde(default)]
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

fn read_coco(path: &Path) -> Result<CocoFile, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    serde_json::from_reader(reader).map_err(|e| DatasetError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Build a dataset from COCO `instances_*.json` and optional `captions_*.json`.
///
/// Labels are category names in the order their annotations appear;
/// captions keep file order.
pub fn load_coco(instances: impl AsRef<Path>, captions: Option<&Path>) -> Result<Dataset, DatasetError> {
    let inst = read_coco(instances.as_ref())?;
    let categories: HashMap<u64, &str> = inst.categories.iter().map(|c| (c.id, c.name.as_str())).collect();

    let mut slot = HashMap::with_capacity(inst.images.len());
    let mut records = Vec::with_capacity(inst.images.len());
    for img in &inst.images {
        if slot.insert(img.id, records.len()).is_some() {
            return Err(DatasetError::DuplicateId(img.id.to_string()));
        }
        records.push(ImageRecord {
            image_id: img.id.to_string(),
            path: img.file_name.clone(),
            labels: Vec::new(),
            captions: Vec::new(),
        });
    }

    for ann in &inst.annotations {
        let Some(category_id) = ann.category_id else { continue };
        let &i = slot.get(&ann.image_id).ok_or(DatasetError::UnknownImage(ann.image_id))?;
        let name = categories.get(&category_id).ok_or(DatasetError::MissingCategory {
            image_id: ann.image_id,
            category_id,
        })?;
        records[i].labels.push((*name).to_owned());
    }

    if let Some(path) = captions {
        for ann in read_coco(path)?.annotations {
            let Some(text) = ann.caption else { continue };
            let &i = slot.get(&ann.image_id).ok_or(DatasetError::UnknownImage(ann.image_id))?;
            records[i].captions.push(text);
        }
    }

    Dataset::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn jsonl_three_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.jsonl",
            r#"{"image_id":"b","path":"b.jpg","labels":["dog","cat"],"captions":["x"]}
{"image_id":"a","path":"a.jpg","labels":["cat"]}

{"image_id":"c","path":"c.jpg","labels":[]}
"#,
        );
        let ds = load_jsonl(&p).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records()[0].image_id, "a");
        assert_eq!(ds.label_vocabulary().iter().collect::<Vec<_>>(), ["cat", "dog"]);
        assert_eq!(ds.unlabeled().map(|r| r.image_id.as_str()).collect::<Vec<_>>(), ["c"]);
        assert_eq!(ds.get("b").unwrap().labels, ["dog", "cat"]);
        let s = ds.summary();
        assert_eq!((s.images, s.labeled, s.label_types, s.with_captions), (3, 2, 2, 1));
    }

    #[test]
    fn jsonl_errors() {
        let dir = tempfile::tempdir().unwrap();
        let dup = write(&dir, "dup.jsonl", "{\"image_id\":\"a\"}\n{\"image_id\":\"a\"}\n");
        assert!(matches!(load_jsonl(&dup), Err(DatasetError::DuplicateId(id)) if id == "a"));
        let bad = write(&dir, "bad.jsonl", "{\"image_id\":\"a\"}\nnot json\n");
        assert!(matches!(load_jsonl(&bad), Err(DatasetError::Malformed { line: 2, .. })));
    }

    #[test]
    fn numeric_ids_sort_numerically() {
        let ds = Dataset::new(vec![
            ImageRecord::new("10", &[], &[]),
            ImageRecord::new("9", &[], &[]),
            ImageRecord::new("x", &[], &[]),
        ])
        .unwrap();
        let ids: Vec<_> = ds.records().iter().map(|r| r.image_id.as_str()).collect();
        assert_eq!(ids, ["9", "10", "x"]);
        assert!(ds.get("10").is_some());
    }

    #[test]
    fn labels_keep_case_and_order() {
        let ds = Dataset::new(vec![ImageRecord::new("1", &["Traffic Light", "car", "Traffic Light"], &[])]).unwrap();
        assert_eq!(ds.records()[0].labels, ["Traffic Light", "car"]);
    }

    const INSTANCES: &str = r#"{
        "images": [{"id": 42, "file_name": "000000000042.jpg"}, {"id": 7, "file_name": "000000000007.jpg"}, {"id": 9, "file_name": "9.jpg"}],
        "annotations": [
            {"image_id": 42, "category_id": 3, "bbox": [0,0,1,1]},
            {"image_id": 42, "category_id": 3},
            {"image_id": 42, "category_id": 6},
            {"image_id": 7, "category_id": 6}
        ],
        "categories": [{"id": 3, "name": "car"}, {"id": 6, "name": "bus"}]
    }"#;

    #[test]
    fn coco_instances_and_captions() {
        let dir = tempfile::tempdir().unwrap();
        let inst = write(&dir, "inst.json", INSTANCES);
        let caps = write(
            &dir,
            "caps.json",
            r#"{"annotations":[{"image_id":42,"caption":"A car and a bus."},{"image_id":42,"caption":"Second."},{"image_id":9,"caption":"Empty road."}]}"#,
        );
        let ds = load_coco(&inst, Some(&caps)).unwrap();
        assert_eq!(ds.len(), 3);
        let r = ds.get("42").unwrap();
        assert_eq!(r.labels, ["car", "bus"]);
        assert_eq!(r.first_caption(), Some("A car and a bus."));
        assert_eq!(r.path, "000000000042.jpg");
        assert_eq!(ds.records()[0].image_id, "7");
        let s = ds.summary();
        assert_eq!((s.images, s.labeled, s.label_types), (3, 2, 2));
    }

    #[test]
    fn coco_without_annotations() {
        let dir = tempfile::tempdir().unwrap();
        let inst = write(&dir, "inst.json", r#"{"images":[{"id":1},{"id":2}],"annotations":[],"categories":[]}"#);
        let ds = load_coco(&inst, None).unwrap();
        assert_eq!(ds.unlabeled().count(), 2);
        assert!(ds.label_vocabulary().is_empty());
    }

    #[test]
    fn coco_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = write(
            &dir,
            "m.json",
            r#"{"images":[{"id":1}],"annotations":[{"image_id":1,"category_id":99}],"categories":[]}"#,
        );
        assert!(matches!(
            load_coco(&missing, None),
            Err(DatasetError::MissingCategory { image_id: 1, category_id: 99 })
        ));
        let broken = write(&dir, "b.json", "{\"images\": [");
        assert!(matches!(load_coco(&broken, None), Err(DatasetError::Json { .. })));
    }
}

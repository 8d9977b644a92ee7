// SPDX-License-Identifier: Apache-2.0

//! Retrieval evaluation: keyword, multi-keyword, caption and feedback
//! scenarios, P@k / R@k over a powers-of-two k sweep, PR-AUC, per-label
//! curves and term statistics.

mod dense;
mod histogram;
mod metrics;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ImageRecord};
use crate::embeddings::EmbeddingError;
use crate::index::{Bm25Params, IndexError, InvertedIndex};
use crate::query::compose_query;

pub use dense::{dense_search, DenseHit, DenseRetriever};
pub use histogram::{term_histogram, DEFAULT_TOP_N};
pub use metrics::{k_sweep, pr_auc, precision_at_k, recall_at_k};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("dataset has no labels")]
    EmptyVocabulary,
    #[error("a query has no relevant images")]
    ZeroRelevant,
    #[error("true positives {tp} exceed bound {bound}")]
    TpExceeds { tp: usize, bound: usize },
    #[error("per-query lists differ in length")]
    LengthMismatch,
    #[error("PR-AUC needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("no embedding for query text `{0}`")]
    MissingQueryEmbedding(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Something that ranks a fixed corpus of images for a text query.
pub trait Retriever: Sync {
    fn name(&self) -> &str;
    /// Image ids; results refer to positions in this slice.
    fn corpus(&self) -> &[String];
    /// At most `k` corpus positions, best first.
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<u32>, EvalError>;
}

/// BM25 over an inverted index.
pub struct SparseRetriever<'a> {
    index: &'a InvertedIndex,
    params: Bm25Params,
}

impl<'a> SparseRetriever<'a> {
    pub fn new(index: &'a InvertedIndex) -> Self {
        Self::with_params(index, Bm25Params::default())
    }

    pub fn with_params(index: &'a InvertedIndex, params: Bm25Params) -> Self {
        Self { index, params }
    }
}

impl Retriever for SparseRetriever<'_> {
    fn name(&self) -> &str {
        "sparse"
    }

    fn corpus(&self) -> &[String] {
        self.index.image_ids()
    }

    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<u32>, EvalError> {
        let r = self.index.search_terms(self.index.analyze(query), k, self.params)?;
        Ok(r.docs().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Keyword,
    MultiKeyword,
    Caption,
    Feedback,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Keyword => "keyword",
            ScenarioKind::MultiKeyword => "multi_keyword",
            ScenarioKind::Caption => "caption",
            ScenarioKind::Feedback => "feedback",
        }
    }
}

/// A query with its ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioQuery {
    pub text: String,
    pub relevant: Vec<String>,
    /// Label this query stands for (keyword scenario).
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDetail {
    pub query: String,
    pub relevant: usize,
    /// `TP_q@k` for each k of the sweep.
    pub tp: Vec<usize>,
    /// 1-based rank of the first relevant image, if retrieved.
    pub first_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCurve {
    pub label: String,
    pub relevant: usize,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub pr_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: String,
    pub retriever: String,
    pub n_queries: usize,
    /// Inputs left out (e.g. images without a caption).
    pub skipped: usize,
    pub k: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub pr_auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_at: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_category: Option<Vec<CategoryCurve>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<FeedbackTrace>,
    pub queries: Vec<QueryDetail>,
}

impl EvalReport {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.recall.iter().copied().zip(self.precision.iter().copied()).collect()
    }

    pub fn recall_at_k(&self, k: usize) -> Option<f64> {
        self.k.iter().position(|&x| x == k).map(|i| self.recall[i])
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `series,k,precision,recall` rows; `series` is `all` or a label.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "series,k,precision,recall")?;
        let mut rows = |series: &str, p: &[f64], r: &[f64]| -> std::io::Result<()> {
            for ((k, p), r) in self.k.iter().zip(p).zip(r) {
                writeln!(out, "{},{k},{p},{r}", csv_field(series))?;
            }
            Ok(())
        };
        rows("all", &self.precision, &self.recall)?;
        for c in self.per_category.iter().flatten() {
            rows(&c.label, &c.precision, &c.recall)?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

struct Ranked {
    relevant: usize,
    /// 1-based ranks of relevant hits, ascending.
    hit_ranks: Vec<usize>,
}

impl Ranked {
    fn tp_at(&self, k: usize) -> usize {
        self.hit_ranks.partition_point(|&r| r <= k)
    }
}

fn rank_queries(queries: &[ScenarioQuery], retriever: &dyn Retriever, depth: usize) -> Result<Vec<Ranked>, EvalError> {
    let position: HashMap<&str, u32> = retriever
        .corpus()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u32))
        .collect();
    queries
        .par_iter()
        .map(|q| {
            let relevant: HashSet<u32> = q
                .relevant
                .iter()
                .filter_map(|id| position.get(id.as_str()).copied())
                .collect();
            let hits = retriever.retrieve(&q.text, depth)?;
            let hit_ranks = hits
                .iter()
                .enumerate()
                .filter(|(_, d)| relevant.contains(d))
                .map(|(i, _)| i + 1)
                .collect();
            Ok(Ranked {
                relevant: q.relevant.len(),
                hit_ranks,
            })
        })
        .collect()
}

fn curve(ranked: &[Ranked], ks: &[usize]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    let relevant: Vec<usize> = ranked.iter().map(|r| r.relevant).collect();
    let mut precision = Vec::with_capacity(ks.len());
    let mut recall = Vec::with_capacity(ks.len());
    for &k in ks {
        let tp: Vec<usize> = ranked.iter().map(|r| r.tp_at(k)).collect();
        precision.push(precision_at_k(&tp, k, ranked.len())?);
        recall.push(recall_at_k(&tp, &relevant)?);
    }
    Ok((precision, recall))
}

fn auc_of(precision: &[f64], recall: &[f64]) -> Option<f64> {
    let points: Vec<(f64, f64)> = recall.iter().copied().zip(precision.iter().copied()).collect();
    pr_auc(&points).ok()
}

/// Evaluate arbitrary queries. `ks` defaults to the sweep over the corpus size.
pub fn evaluate(
    scenario: &str,
    queries: &[ScenarioQuery],
    retriever: &dyn Retriever,
    ks: Option<&[usize]>,
) -> Result<EvalReport, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let ks: Vec<usize> = match ks {
        Some(ks) => ks.to_vec(),
        None => k_sweep(retriever.corpus().len()),
    };
    if ks.iter().any(|&k| k < 1) || ks.is_empty() {
        return Err(EvalError::InvalidK);
    }
    let depth = ks.iter().copied().max().unwrap_or(1).max(10);
    let ranked = rank_queries(queries, retriever, depth)?;
    let (precision, recall) = curve(&ranked, &ks)?;
    let pr_auc = auc_of(&precision, &recall);
    let details = queries
        .iter()
        .zip(&ranked)
        .map(|(q, r)| QueryDetail {
            query: q.text.clone(),
            relevant: r.relevant,
            tp: ks.iter().map(|&k| r.tp_at(k)).collect(),
            first_rank: r.hit_ranks.first().copied(),
        })
        .collect();

    let per_category = if queries.iter().any(|q| q.label.is_some()) {
        let mut curves = Vec::new();
        for (q, r) in queries.iter().zip(&ranked) {
            let Some(label) = &q.label else { continue };
            let (p, rc) = curve(std::slice::from_ref(r), &ks)?;
            curves.push(CategoryCurve {
                label: label.clone(),
                relevant: r.relevant,
                pr_auc: auc_of(&p, &rc),
                precision: p,
                recall: rc,
            });
        }
        Some(curves)
    } else {
        None
    };

    Ok(EvalReport {
        scenario: scenario.to_owned(),
        retriever: retriever.name().to_owned(),
        n_queries: queries.len(),
        skipped: 0,
        k: ks,
        precision,
        recall,
        pr_auc,
        recall_at: None,
        per_category,
        trace: None,
        queries: details,
    })
}

/// One query per label; relevant = images carrying the label.
pub fn keyword_queries(dataset: &Dataset) -> Result<Vec<ScenarioQuery>, EvalError> {
    if dataset.label_vocabulary().is_empty() {
        return Err(EvalError::EmptyVocabulary);
    }
    Ok(dataset
        .label_vocabulary()
        .iter()
        .map(|label| ScenarioQuery {
            text: label.clone(),
            relevant: dataset
                .records()
                .iter()
                .filter(|r| r.labels.contains(label))
                .map(|r| r.image_id.clone())
                .collect(),
            label: Some(label.clone()),
        })
        .collect())
}

/// One query per distinct label set, joined in annotation order of the first
/// image carrying it; relevant = images whose labels include the whole set.
pub fn multikeyword_queries(dataset: &Dataset) -> Result<Vec<ScenarioQuery>, EvalError> {
    let labeled: Vec<&ImageRecord> = dataset.records().iter().filter(|r| r.is_labeled()).collect();
    if labeled.is_empty() {
        return Err(EvalError::EmptyVocabulary);
    }
    let label_sets: Vec<BTreeSet<&str>> = labeled
        .iter()
        .map(|r| r.labels.iter().map(String::as_str).collect())
        .collect();
    let mut seen = HashSet::new();
    let mut queries = Vec::new();
    for (record, set) in labeled.iter().zip(&label_sets) {
        if !seen.insert(set.clone()) {
            continue;
        }
        let relevant = labeled
            .iter()
            .zip(&label_sets)
            .filter(|(_, other)| set.is_subset(other))
            .map(|(r, _)| r.image_id.clone())
            .collect();
        queries.push(ScenarioQuery {
            text: record.labels.join(", "),
            relevant,
            label: None,
        });
    }
    Ok(queries)
}

/// One query per captioned image (first caption); relevant = that image.
/// Returns the queries and the number of images skipped for lack of a caption.
pub fn caption_queries(dataset: &Dataset) -> (Vec<ScenarioQuery>, usize) {
    let mut skipped = 0;
    let queries = dataset
        .records()
        .iter()
        .filter_map(|r| match r.first_caption() {
            Some(c) => Some(ScenarioQuery {
                text: c.to_owned(),
                relevant: vec![r.image_id.clone()],
                label: None,
            }),
            None => {
                skipped += 1;
                None
            }
        })
        .collect();
    (queries, skipped)
}

pub fn run_keyword_scenario(dataset: &Dataset, retriever: &dyn Retriever, ks: Option<&[usize]>) -> Result<EvalReport, EvalError> {
    evaluate(ScenarioKind::Keyword.as_str(), &keyword_queries(dataset)?, retriever, ks)
}

pub fn run_multikeyword_scenario(
    dataset: &Dataset,
    retriever: &dyn Retriever,
    ks: Option<&[usize]>,
) -> Result<EvalReport, EvalError> {
    evaluate(ScenarioKind::MultiKeyword.as_str(), &multikeyword_queries(dataset)?, retriever, ks)
}

/// R@1/5/10 from the first relevant rank of each single-target query.
fn with_table_recall(mut report: EvalReport) -> EvalReport {
    let n = report.queries.len();
    let mut table = BTreeMap::new();
    for k in [1usize, 5, 10] {
        let tp = report
            .queries
            .iter()
            .filter(|d| d.first_rank.is_some_and(|r| r <= k))
            .count();
        table.insert(format!("R@{k}"), tp as f64 / n as f64);
    }
    report.recall_at = Some(table);
    report
}

pub fn run_caption_scenario(dataset: &Dataset, retriever: &dyn Retriever, ks: Option<&[usize]>) -> Result<EvalReport, EvalError> {
    let (queries, skipped) = caption_queries(dataset);
    let mut report = evaluate(ScenarioKind::Caption.as_str(), &queries, retriever, ks)?;
    report.skipped = skipped;
    Ok(with_table_recall(report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub query: String,
    /// 1-based rank of the target image; `None` when it was not retrieved.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTrace {
    pub image_id: String,
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackTrace {
    /// R@1 over all traced images, per step.
    pub recall_at_1: Vec<f64>,
    pub images: Vec<ImageTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackOutcome {
    pub trace: FeedbackTrace,
    /// Caption-scenario style report for each step `0..=max_steps`.
    pub steps: Vec<EvalReport>,
    /// Report for caption plus every label, with the trace attached.
    pub all_labels: EvalReport,
}

/// Caption query refined by appending the image's labels one at a time.
///
/// Step `s` sends the caption followed by the first `s` labels (annotation
/// order). Images without a caption or without labels are skipped.
pub fn run_feedback_scenario(
    dataset: &Dataset,
    retriever: &dyn Retriever,
    max_steps: usize,
    ks: Option<&[usize]>,
) -> Result<FeedbackOutcome, EvalError> {
    let targets: Vec<(&ImageRecord, &str)> = dataset
        .records()
        .iter()
        .filter(|r| r.is_labeled())
        .filter_map(|r| r.first_caption().map(|c| (r, c)))
        .collect();
    let skipped = dataset.len() - targets.len();
    if targets.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let queries_for = |take: &dyn Fn(&ImageRecord) -> usize| -> Vec<ScenarioQuery> {
        targets
            .iter()
            .map(|(r, caption)| ScenarioQuery {
                text: compose_query(caption, &r.labels[..take(r)]),
                relevant: vec![r.image_id.clone()],
                label: None,
            })
            .collect()
    };

    let mut steps = Vec::with_capacity(max_steps + 1);
    let mut traces: Vec<ImageTrace> = targets
        .iter()
        .map(|(r, _)| ImageTrace {
            image_id: r.image_id.clone(),
            steps: Vec::with_capacity(max_steps + 1),
        })
        .collect();
    for s in 0..=max_steps {
        let queries = queries_for(&|r: &ImageRecord| s.min(r.labels.len()));
        let mut report = evaluate(ScenarioKind::Feedback.as_str(), &queries, retriever, ks)?;
        report.skipped = skipped;
        let report = with_table_recall(report);
        for (trace, detail) in traces.iter_mut().zip(&report.queries) {
            trace.steps.push(TraceStep {
                step: s,
                query: detail.query.clone(),
                rank: detail.first_rank,
            });
        }
        steps.push(report);
    }

    let recall_at_1 = steps
        .iter()
        .map(|r| r.recall_at.as_ref().map_or(0.0, |t| t["R@1"]))
        .collect();
    let trace = FeedbackTrace {
        recall_at_1,
        images: traces,
    };

    let all = queries_for(&|r: &ImageRecord| r.labels.len());
    let mut all_labels = evaluate(ScenarioKind::Feedback.as_str(), &all, retriever, ks)?;
    all_labels.skipped = skipped;
    let mut all_labels = with_table_recall(all_labels);
    all_labels.trace = Some(trace.clone());

    Ok(FeedbackOutcome {
        trace,
        steps,
        all_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::AnalyzerConfig;

    fn ds(records: Vec<ImageRecord>) -> Dataset {
        Dataset::new(records).unwrap()
    }

    /// Returns the corpus in a fixed order regardless of the query.
    struct Fixed(Vec<String>);

    impl Retriever for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn corpus(&self) -> &[String] {
            &self.0
        }
        fn retrieve(&self, _: &str, k: usize) -> Result<Vec<u32>, EvalError> {
            Ok((0..self.0.len().min(k) as u32).collect())
        }
    }

    #[test]
    fn keyword_queries_toy() {
        let d = ds(vec![
            ImageRecord::new("1", &["a"], &[]),
            ImageRecord::new("2", &["a", "b"], &[]),
            ImageRecord::new("3", &["b"], &[]),
            ImageRecord::new("4", &[], &[]),
        ]);
        let q = keyword_queries(&d).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].text, "a");
        assert_eq!(q[0].relevant, ["1", "2"]);
        assert_eq!(q[1].relevant, ["2", "3"]);
        let empty = ds(vec![ImageRecord::new("1", &[], &[])]);
        assert!(matches!(keyword_queries(&empty), Err(EvalError::EmptyVocabulary)));
    }

    #[test]
    fn single_image_label_found_first() {
        let d = ds(vec![ImageRecord::new("1", &["zebra"], &[]), ImageRecord::new("2", &["cat"], &[])]);
        let r = run_keyword_scenario(&d, &Fixed(vec!["1".into(), "2".into()]), None).unwrap();
        assert_eq!(r.queries[1].query, "zebra");
        assert_eq!(r.queries[1].tp[0], 1);
        let zebra = &r.per_category.as_ref().unwrap()[1];
        assert_eq!(zebra.label, "zebra");
        assert_eq!(zebra.precision[0], 1.0);
    }

    #[test]
    fn multikeyword_superset_and_dedup() {
        let d = ds(vec![
            ImageRecord::new("1", &["car", "bus"], &[]),
            ImageRecord::new("2", &["car", "bus", "person"], &[]),
            ImageRecord::new("3", &["bus", "car"], &[]),
            ImageRecord::new("4", &["car"], &[]),
        ]);
        let q = multikeyword_queries(&d).unwrap();
        let texts: Vec<_> = q.iter().map(|q| q.text.as_str()).collect();
        assert_eq!(texts, ["car, bus", "car, bus, person", "car"]);
        assert_eq!(q[0].relevant, ["1", "2", "3"]);
        assert_eq!(q[2].relevant, ["1", "2", "3", "4"]);
    }

    #[test]
    fn caption_skips_uncaptioned() {
        let d = ds(vec![ImageRecord::new("1", &[], &["a red bus", "other"]), ImageRecord::new("2", &[], &[])]);
        let (q, skipped) = caption_queries(&d);
        assert_eq!(skipped, 1);
        assert_eq!(q[0].text, "a red bus");
    }

    fn corpus_index(texts: &[(&str, &str)]) -> InvertedIndex {
        InvertedIndex::build_from_texts(texts, AnalyzerConfig::default()).unwrap()
    }

    #[test]
    fn caption_unique_objects_recall_one() {
        let idx = corpus_index(&[("1", "a giraffe"), ("2", "a toaster"), ("3", "a kite")]);
        let d = ds(vec![
            ImageRecord::new("1", &[], &["giraffe standing"]),
            ImageRecord::new("2", &[], &["shiny toaster"]),
            ImageRecord::new("3", &[], &["kite in the sky"]),
        ]);
        let r = run_caption_scenario(&d, &SparseRetriever::new(&idx), None).unwrap();
        assert_eq!(r.recall_at_k(1), Some(1.0));
        assert_eq!(r.recall_at.as_ref().unwrap()["R@1"], 1.0);
    }

    #[test]
    fn unmatched_caption_contributes_nothing() {
        let idx = corpus_index(&[("1", "a giraffe"), ("2", "a toaster")]);
        let d = ds(vec![ImageRecord::new("1", &[], &["quantum chromodynamics"]), ImageRecord::new("2", &[], &["toaster"])]);
        let r = run_caption_scenario(&d, &SparseRetriever::new(&idx), None).unwrap();
        assert!(r.queries[0].tp.iter().all(|&t| t == 0));
        assert_eq!(r.recall, [0.5, 0.5]);
    }

    #[test]
    fn report_json_and_csv() {
        let d = ds(vec![ImageRecord::new("1", &["a"], &[]), ImageRecord::new("2", &["b,c"], &[])]);
        let r = run_keyword_scenario(&d, &Fixed(vec!["1".into(), "2".into()]), None).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["scenario", "retriever", "k", "precision", "recall", "pr_auc", "per_category"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("series,k,precision,recall\nall,1,"));
        assert!(csv.contains("\"b,c\",2,"));
    }

    #[test]
    fn feedback_zero_steps_is_caption_scenario() {
        let idx = corpus_index(&[("1", "a dog on grass with a ball"), ("2", "a dog on a sofa"), ("3", "a cat")]);
        let d = ds(vec![
            ImageRecord::new("1", &["dog", "ball"], &["a dog"]),
            ImageRecord::new("2", &["dog", "couch"], &["a dog"]),
            ImageRecord::new("3", &[], &["a cat"]),
        ]);
        let retriever = SparseRetriever::new(&idx);
        let out = run_feedback_scenario(&d, &retriever, 0, None).unwrap();
        let labeled = ds(d.records().iter().filter(|r| r.is_labeled()).cloned().collect());
        let cap = run_caption_scenario(&labeled, &retriever, None).unwrap();
        assert_eq!(out.steps.len(), 1);
        assert_eq!(out.steps[0].precision, cap.precision);
        assert_eq!(out.steps[0].recall, cap.recall);
        assert_eq!(out.steps[0].queries, cap.queries);
        assert_eq!(out.steps[0].skipped, 1);
    }

    #[test]
    fn feedback_trace_shape() {
        let idx = corpus_index(&[("1", "a dog on grass with a ball"), ("2", "a dog on a sofa")]);
        let d = ds(vec![
            ImageRecord::new("1", &["dog", "ball"], &["a dog"]),
            ImageRecord::new("2", &["dog", "sofa"], &["a dog"]),
        ]);
        let out = run_feedback_scenario(&d, &SparseRetriever::new(&idx), 3, None).unwrap();
        assert_eq!(out.trace.recall_at_1.len(), 4);
        let t = &out.trace.images[0];
        assert_eq!(t.steps[0].query, "a dog");
        assert_eq!(t.steps[1].query, "a dog, dog");
        assert_eq!(t.steps[2].query, "a dog, dog, ball");
        assert_eq!(t.steps[3].query, "a dog, dog, ball");
        assert_eq!(t.steps[2].rank, Some(1));
        assert_eq!(*out.trace.recall_at_1.last().unwrap(), 1.0);
        assert!(out.all_labels.trace.is_some());
    }
}

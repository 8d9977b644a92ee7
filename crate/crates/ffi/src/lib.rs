// SPDX-License-Identifier: Apache-2.0

//! C ABI over the lexret core.
//!
//! Indexes and result sets are opaque handles released with their `_free`
//! function. Every fallible call returns a [`LexretStatus`]; on failure
//! [`lexret_last_error_message`] describes the error for the calling thread.
//! Strings are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lexret::caption::load_captions;
use lexret::clipscore::{clip_score, ClipScoreConfig};
use lexret::crops::{CropError, CropPattern};
use lexret::embeddings::{Embedding, EmbeddingError};
use lexret::index::{load_index, save_index, IndexError, InvertedIndex};
use lexret::AnalyzerConfig;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexretStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Format = 5,
    Version = 6,
    Checksum = 7,
    Truncated = 8,
    BufferTooSmall = 9,
    Internal = 10,
}

/// Loaded or built index.
pub struct LexretIndex {
    inner: InvertedIndex,
}

/// Ranked hits of one search.
pub struct LexretResults {
    ids: Vec<CString>,
    scores: Vec<f64>,
    total_hits: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LexretRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LexretStatus, String);

impl Failure {
    fn arg(message: impl Into<String>) -> Self {
        Failure(LexretStatus::InvalidArgument, message.into())
    }
}

impl From<IndexError> for Failure {
    fn from(e: IndexError) -> Self {
        let status = match &e {
            IndexError::Io(_) => LexretStatus::Io,
            IndexError::Format(_) | IndexError::Corrupt(_) => LexretStatus::Format,
            IndexError::Version { .. } => LexretStatus::Version,
            IndexError::Checksum { .. } => LexretStatus::Checksum,
            IndexError::Truncated => LexretStatus::Truncated,
            _ => LexretStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<CropError> for Failure {
    fn from(e: CropError) -> Self {
        Failure::arg(e.to_string())
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        Failure::arg(e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, recording any error or panic for [`lexret_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LexretStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LexretStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LexretStatus::Internal
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(LexretStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LexretStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(LexretStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next lexret call on the same thread.
#[no_mangle]
pub extern "C" fn lexret_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version string (static).
#[no_mangle]
pub extern "C" fn lexret_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load an index file written by `lexret index`.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lexret_index_load(path: *const c_char, out: *mut *mut LexretIndex) -> LexretStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = load_index(path)?;
        *out = Box::into_raw(Box::new(LexretIndex { inner }));
        Ok(())
    })
}

/// Build an index from a captions JSONL file with the default analyzer.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lexret_index_build_from_captions(
    path: *const c_char,
    out: *mut *mut LexretIndex,
) -> LexretStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let docs = load_captions(path).map_err(|e| Failure(LexretStatus::Io, e.to_string()))?;
        let inner = InvertedIndex::build(&docs, AnalyzerConfig::default())?;
        *out = Box::into_raw(Box::new(LexretIndex { inner }));
        Ok(())
    })
}

/// Build an index from `n` parallel arrays of image ids and document texts.
///
/// # Safety
/// `image_ids` and `texts` must each point to `n` valid C strings.
#[no_mangle]
pub unsafe extern "C" fn lexret_index_build(
    image_ids: *const *const c_char,
    texts: *const *const c_char,
    n: usize,
    out: *mut *mut LexretIndex,
) -> LexretStatus {
    guard(|| {
        out_arg(out, "out")?;
        if n > 0 && (image_ids.is_null() || texts.is_null()) {
            return Err(Failure(LexretStatus::NullPointer, "input arrays are null".into()));
        }
        let mut pairs = Vec::with_capacity(n);
        for i in 0..n {
            let id = str_arg(*image_ids.add(i), "image id")?;
            let text = str_arg(*texts.add(i), "text")?;
            pairs.push((id, text));
        }
        let inner = InvertedIndex::build_from_texts(&pairs, AnalyzerConfig::default())?;
        *out = Box::into_raw(Box::new(LexretIndex { inner }));
        Ok(())
    })
}

/// # Safety
/// `index` must come from this library; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn lexret_index_save(index: *const LexretIndex, path: *const c_char) -> LexretStatus {
    guard(|| {
        let index = index
            .as_ref()
            .ok_or_else(|| Failure(LexretStatus::NullPointer, "index is null".into()))?;
        save_index(&index.inner, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of documents; 0 for a null handle.
///
/// # Safety
/// `index` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn lexret_index_n_docs(index: *const LexretIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.n_docs())
}

/// # Safety
/// `index` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lexret_index_free(index: *mut LexretIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// BM25 search returning at most `k` hits.
///
/// # Safety
/// `index` must come from this library, `query` must be a valid C string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lexret_search(
    index: *const LexretIndex,
    query: *const c_char,
    k: usize,
    out: *mut *mut LexretResults,
) -> LexretStatus {
    guard(|| {
        out_arg(out, "out")?;
        let index = index
            .as_ref()
            .ok_or_else(|| Failure(LexretStatus::NullPointer, "index is null".into()))?;
        let ranked = index.inner.search(str_arg(query, "query")?, k)?;
        let ids = ranked
            .hits
            .iter()
            .map(|h| CString::new(index.inner.image_id(h.doc).unwrap_or_default()).unwrap_or_default())
            .collect();
        let scores = ranked.hits.iter().map(|h| h.score).collect();
        *out = Box::into_raw(Box::new(LexretResults {
            ids,
            scores,
            total_hits: ranked.total_hits,
        }));
        Ok(())
    })
}

/// # Safety
/// `results` must be null or come from [`lexret_search`].
#[no_mangle]
pub unsafe extern "C" fn lexret_results_len(results: *const LexretResults) -> usize {
    results.as_ref().map_or(0, |r| r.scores.len())
}

/// Documents with a positive score, before truncation to `k`.
///
/// # Safety
/// `results` must be null or come from [`lexret_search`].
#[no_mangle]
pub unsafe extern "C" fn lexret_results_total_hits(results: *const LexretResults) -> usize {
    results.as_ref().map_or(0, |r| r.total_hits)
}

/// Image id of hit `i`, or null when out of range. Owned by `results`.
///
/// # Safety
/// `results` must be null or come from [`lexret_search`].
#[no_mangle]
pub unsafe extern "C" fn lexret_results_image_id(results: *const LexretResults, i: usize) -> *const c_char {
    results
        .as_ref()
        .and_then(|r| r.ids.get(i))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Score of hit `i`, or NaN when out of range.
///
/// # Safety
/// `results` must be null or come from [`lexret_search`].
#[no_mangle]
pub unsafe extern "C" fn lexret_results_score(results: *const LexretResults, i: usize) -> f64 {
    results
        .as_ref()
        .and_then(|r| r.scores.get(i).copied())
        .unwrap_or(f64::NAN)
}

/// # Safety
/// `results` must be null or come from [`lexret_search`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lexret_results_free(results: *mut LexretResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// Crop rectangles of a built-in pattern (`none`, `crops17`, `crops40`) for a
/// `width`×`height` image. `*out_len` always receives the crop count; when it
/// exceeds `capacity` nothing is written and `BufferTooSmall` is returned.
///
/// # Safety
/// `pattern` must be a valid C string, `out` must have room for `capacity`
/// rects (or be null when `capacity` is 0), `out_len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lexret_crops_generate(
    pattern: *const c_char,
    width: u32,
    height: u32,
    out: *mut LexretRect,
    capacity: usize,
    out_len: *mut usize,
) -> LexretStatus {
    guard(|| {
        out_arg(out_len, "out_len")?;
        let rects = CropPattern::by_name(str_arg(pattern, "pattern")?)?.generate(width, height)?;
        *out_len = rects.len();
        if rects.len() > capacity {
            return Err(Failure(
                LexretStatus::BufferTooSmall,
                format!("need room for {} rects, have {capacity}", rects.len()),
            ));
        }
        out_arg(out, "out")?;
        for (i, r) in rects.iter().enumerate() {
            *out.add(i) = LexretRect {
                x: r.x,
                y: r.y,
                w: r.w,
                h: r.h,
            };
        }
        Ok(())
    })
}

/// `w · max(cos(a, b), 0)` for two `dim`-dimensional vectors.
///
/// # Safety
/// `a` and `b` must point to `dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lexret_clip_score(
    a: *const f64,
    b: *const f64,
    dim: usize,
    w: f64,
    out: *mut f64,
) -> LexretStatus {
    guard(|| {
        out_arg(out, "out")?;
        if a.is_null() || b.is_null() {
            return Err(Failure(LexretStatus::NullPointer, "vector is null".into()));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Failure::arg("w must be positive"));
        }
        let ea = Embedding::new("a", std::slice::from_raw_parts(a, dim).to_vec())?;
        let eb = Embedding::new("b", std::slice::from_raw_parts(b, dim).to_vec())?;
        *out = clip_score(&ea, &eb, ClipScoreConfig { w })?;
        Ok(())
    })
}

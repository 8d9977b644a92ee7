// SPDX-License-Identifier: Apache-2.0

use std::ffi::{CStr, CString};
use std::ptr;

use lexret_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = lexret_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn toy_index() -> *mut LexretIndex {
    let ids = [c("d1"), c("d2"), c("d3")];
    let texts = [c("apple banana"), c("apple apple cherry"), c("banana")];
    let id_ptrs: Vec<_> = ids.iter().map(|s| s.as_ptr()).collect();
    let text_ptrs: Vec<_> = texts.iter().map(|s| s.as_ptr()).collect();
    let mut index = ptr::null_mut();
    let st = lexret_index_build(id_ptrs.as_ptr(), text_ptrs.as_ptr(), 3, &mut index);
    assert_eq!(st, LexretStatus::Ok);
    index
}

#[test]
fn build_search_and_free() {
    unsafe {
        let index = toy_index();
        assert_eq!(lexret_index_n_docs(index), 3);
        let mut results = ptr::null_mut();
        let q = c("apple");
        assert_eq!(lexret_search(index, q.as_ptr(), 10, &mut results), LexretStatus::Ok);
        assert_eq!(lexret_results_len(results), 2);
        assert_eq!(lexret_results_total_hits(results), 2);
        let first = CStr::from_ptr(lexret_results_image_id(results, 0)).to_str().unwrap();
        assert_eq!(first, "d2");
        assert!((lexret_results_score(results, 0) - 0.3052).abs() < 1e-4);
        assert!(lexret_results_image_id(results, 2).is_null());
        assert!(lexret_results_score(results, 2).is_nan());
        lexret_results_free(results);
        lexret_index_free(index);
    }
}

#[test]
fn save_load_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("idx.json").to_str().unwrap());
    unsafe {
        let index = toy_index();
        assert_eq!(lexret_index_save(index, path.as_ptr()), LexretStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(lexret_index_load(path.as_ptr(), &mut loaded), LexretStatus::Ok);
        assert_eq!(lexret_index_n_docs(loaded), 3);
        lexret_index_free(loaded);
        lexret_index_free(index);

        let missing = c(dir.path().join("nope.json").to_str().unwrap());
        let mut out = ptr::null_mut();
        assert_eq!(lexret_index_load(missing.as_ptr(), &mut out), LexretStatus::Io);
        assert!(out.is_null());
        assert!(!last_error().is_empty());

        std::fs::write(dir.path().join("bad.json"), "{\"format\":\"lexret-index\",").unwrap();
        let bad = c(dir.path().join("bad.json").to_str().unwrap());
        assert_eq!(lexret_index_load(bad.as_ptr(), &mut out), LexretStatus::Truncated);

        assert_eq!(lexret_index_load(ptr::null(), &mut out), LexretStatus::NullPointer);
        assert_eq!(lexret_search(ptr::null(), path.as_ptr(), 1, ptr::null_mut()), LexretStatus::NullPointer);
    }
}

#[test]
fn invalid_k() {
    unsafe {
        let index = toy_index();
        let mut results = ptr::null_mut();
        let q = c("apple");
        assert_eq!(lexret_search(index, q.as_ptr(), 0, &mut results), LexretStatus::InvalidArgument);
        assert!(last_error().contains('k'));
        lexret_index_free(index);
    }
}

#[test]
fn crops_into_buffer() {
    unsafe {
        let name = c("crops17");
        let mut len = 0usize;
        assert_eq!(
            lexret_crops_generate(name.as_ptr(), 100, 100, ptr::null_mut(), 0, &mut len),
            LexretStatus::BufferTooSmall
        );
        assert_eq!(len, 17);
        let mut buf = vec![LexretRect::default(); len];
        assert_eq!(
            lexret_crops_generate(name.as_ptr(), 100, 100, buf.as_mut_ptr(), buf.len(), &mut len),
            LexretStatus::Ok
        );
        let area: u64 = buf.iter().map(|r| u64::from(r.w) * u64::from(r.h)).sum();
        assert_eq!(area, 4 * 100 * 100);
        let bogus = c("crops99");
        assert_eq!(
            lexret_crops_generate(bogus.as_ptr(), 100, 100, buf.as_mut_ptr(), buf.len(), &mut len),
            LexretStatus::InvalidArgument
        );
    }
}

#[test]
fn clip_score_values() {
    let a = [1.0, 2.0, 3.0];
    let neg = [-1.0, -2.0, -3.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(lexret_clip_score(a.as_ptr(), a.as_ptr(), 3, 2.5, &mut out), LexretStatus::Ok);
        assert!((out - 2.5).abs() < 1e-12);
        assert_eq!(lexret_clip_score(a.as_ptr(), neg.as_ptr(), 3, 2.5, &mut out), LexretStatus::Ok);
        assert_eq!(out, 0.0);
        let zero = [0.0; 3];
        assert_eq!(lexret_clip_score(a.as_ptr(), zero.as_ptr(), 3, 2.5, &mut out), LexretStatus::InvalidArgument);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lexret.h")).unwrap();
    for name in [
        "lexret_last_error_message",
        "lexret_version",
        "lexret_index_load",
        "lexret_index_build",
        "lexret_index_build_from_captions",
        "lexret_index_save",
        "lexret_index_free",
        "lexret_search",
        "lexret_results_len",
        "lexret_results_image_id",
        "lexret_results_score",
        "lexret_results_free",
        "lexret_crops_generate",
        "lexret_clip_score",
        "typedef struct LexretIndex LexretIndex",
        "LEXRET_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

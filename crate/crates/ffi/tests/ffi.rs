use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use quote_core::builder::{build_index, BuildOptions};
use quote_core::corpus::{split_corpus, ChunkingPolicy, Document};
use quote_core::question_gen::{PromptTemplate, QuestionBudget, TemplateName};
use quote_core::{Composition, MockEmbedder, MockGenerator};
use quote_ffi::*;

fn build_fixture_index(dir: &Path) {
    let docs = vec![
        Document {
            doc_id: "a".into(),
            title: "Alpha".into(),
            body: "Alpha is the first letter.\n\nIt comes before beta.".into(),
        },
        Document {
            doc_id: "b".into(),
            title: "Beta".into(),
            body: "Beta is the second letter.".into(),
        },
    ];
    let chunks = split_corpus(&docs, &ChunkingPolicy::paragraph()).unwrap().chunks;
    let mut opts = BuildOptions::new(
        PromptTemplate::builtin(TemplateName::NqSquadBasic),
        QuestionBudget::fixed(2).unwrap(),
    );
    opts.composition = Composition {
        question_chunk: true,
        bare_chunk: true,
        question_only: false,
    };
    let out = build_index(&chunks, &MockGenerator::new(2), &MockEmbedder::new(16, 1), &opts).unwrap();
    out.store.save(dir).unwrap();
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    quote_string_free(p);
    s
}

unsafe fn last_error() -> String {
    let p = quote_last_error_message();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_str().unwrap().to_string()
}

#[test]
fn open_query_close() {
    let dir = tempfile::tempdir().unwrap();
    build_fixture_index(dir.path());
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        let mut index = ptr::null_mut();
        assert_eq!(quote_index_open(path.as_ptr(), &mut index), QuoteStatus::Ok);
        assert!(!index.is_null());

        let mut n = 0usize;
        assert_eq!(quote_index_doc_count(index, &mut n), QuoteStatus::Ok);
        assert_eq!(n, 3 * 2 + 3);

        let mut json = ptr::null_mut();
        assert_eq!(quote_index_manifest_json(index, &mut json), QuoteStatus::Ok);
        let manifest: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(manifest["embedder_id"], "mock-hash:dim=16:salt=1");

        let q = CString::new("Which letter comes first?").unwrap();
        for (mode, k) in [(QuoteMode::Quote, 2), (QuoteMode::Naive, 3)] {
            let mut out = ptr::null_mut();
            assert_eq!(quote_index_query(index, q.as_ptr(), mode, k, 5, &mut out), QuoteStatus::Ok);
            let result: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
            let contexts = result["contexts"].as_array().unwrap();
            assert_eq!(contexts.len(), k);
            assert!(result["elapsed_ms"].as_f64().unwrap() >= 0.0);
        }

        let mut out = ptr::null_mut();
        assert_eq!(
            quote_index_query(index, q.as_ptr(), QuoteMode::Quote, 0, 5, &mut out),
            QuoteStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert!(last_error().contains("k must be at least 1"));
        quote_index_close(index);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut index = ptr::null_mut();
        let missing = CString::new("/nonexistent/quote/index").unwrap();
        assert_eq!(quote_index_open(missing.as_ptr(), &mut index), QuoteStatus::LoadError);
        assert!(index.is_null());
        assert!(last_error().contains("nonexistent"));

        assert_eq!(quote_index_open(ptr::null(), &mut index), QuoteStatus::InvalidArgument);
        let mut n = 0usize;
        assert_eq!(quote_index_doc_count(ptr::null(), &mut n), QuoteStatus::InvalidArgument);
        quote_index_close(ptr::null_mut());
        quote_string_free(ptr::null_mut());
    }
}

#[test]
fn truncated_vectors_are_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    build_fixture_index(dir.path());
    let vectors = dir.path().join("vectors.bin");
    let len = std::fs::metadata(&vectors).unwrap().len();
    let f = std::fs::OpenOptions::new().write(true).open(&vectors).unwrap();
    f.set_len(len - 3).unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        let mut index = ptr::null_mut();
        assert_eq!(quote_index_open(path.as_ptr(), &mut index), QuoteStatus::IndexCorrupt);
    }
}

#[test]
fn parse_and_cosine() {
    let raw = CString::new("1. What is X? It is Y.\nno question here\n\n- Why? Because.").unwrap();
    let id = CString::new("c1").unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(quote_parse_qa_lines(raw.as_ptr(), id.as_ptr(), &mut out), QuoteStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(v["malformed"], 1);
        assert_eq!(v["pairs"][0]["question"], "What is X?");
        assert_eq!(v["pairs"][0]["answer"], "It is Y.");
        assert_eq!(v["pairs"][1]["question"], "Why?");

        let a = [1.0f32, 2.0, 3.0];
        let b = [4.0f32, 5.0, 6.0];
        let mut c = 0.0f64;
        assert_eq!(quote_cosine_similarity(a.as_ptr(), b.as_ptr(), 3, &mut c), QuoteStatus::Ok);
        // 32 / sqrt(14 * 77)
        assert!((c - 0.974_631_846_197_076_3).abs() < 1e-6);
        let z = [0.0f32; 3];
        assert_eq!(
            quote_cosine_similarity(a.as_ptr(), z.as_ptr(), 3, &mut c),
            QuoteStatus::InvalidArgument
        );
    }
}

/// The generated header must compile as C.
#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/quote_ffi.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "quote_index_open",
        "quote_index_close",
        "quote_index_query",
        "quote_index_doc_count",
        "quote_index_manifest_json",
        "quote_parse_qa_lines",
        "quote_cosine_similarity",
        "quote_string_free",
        "quote_last_error_message",
        "QUOTE_STATUS_INDEX_CORRUPT",
    ] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match std::process::Command::new(&compiler)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-xc"])
        .arg(&header)
        .status()
    {
        Ok(status) => assert!(status.success(), "{compiler} rejected the header"),
        Err(e) => eprintln!("skipping C syntax check: {compiler} unavailable ({e})"),
    }
}

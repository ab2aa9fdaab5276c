//! C ABI over `quote-core`.
//!
//! Every fallible function returns a [`QuoteStatus`]; on failure the message
//! is available from [`quote_last_error_message`] on the same thread.
//! Strings returned through `out` pointers are owned by the caller and must
//! be released with [`quote_string_free`]. Indexes opened here must use an
//! offline embedder (`mock-hash` or `token-hash`), which is rebuilt from the
//! manifest.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use quote_core::embedding::{cosine_similarity, offline_embedder_from_identity, EmbeddingVector};
use quote_core::question_gen::parse_qa_lines;
use quote_core::{EmbedderBackend, Error, RetrievalConfig, RetrievalMode, Retriever, VectorStore};

/// Status codes. `QUOTE_STATUS_OK` is zero; everything else is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuoteStatus {
    Ok = 0,
    InvalidArgument = 1,
    LoadError = 2,
    IndexCorrupt = 3,
    EmptyIndex = 4,
    ManifestMismatch = 5,
    BackendError = 6,
    IoError = 7,
    /// A Rust panic was caught at the boundary.
    InternalError = 8,
}

/// Retrieval strategy for [`quote_index_query`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuoteMode {
    Naive = 0,
    Quote = 1,
}

/// Opaque handle to a loaded index.
pub struct QuoteIndex {
    store: VectorStore,
    embedder: Box<dyn EmbedderBackend>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QuoteStatus {
    match e {
        Error::InvalidInput(_) | Error::Template(_) | Error::DuplicateKey(_) => {
            QuoteStatus::InvalidArgument
        }
        Error::Load { .. } => QuoteStatus::LoadError,
        Error::IndexCorrupt { .. } => QuoteStatus::IndexCorrupt,
        Error::EmptyIndex => QuoteStatus::EmptyIndex,
        Error::ManifestMismatch(_) => QuoteStatus::ManifestMismatch,
        Error::Generation { .. } | Error::Embedding { .. } | Error::Protocol(_) | Error::Hyde(_) => {
            QuoteStatus::BackendError
        }
        Error::Io(_) => QuoteStatus::IoError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> QuoteStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QuoteStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {msg}"));
            QuoteStatus::InternalError
        }
    }
}

fn null_arg(name: &str) -> Error {
    Error::InvalidInput(format!("{name} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidInput(format!("{name} is not valid UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Error> {
    let c = CString::new(s).map_err(|_| Error::InvalidInput("output contains a nul byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last error on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn quote_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn quote_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load the index directory at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn quote_index_open(path: *const c_char, out: *mut *mut QuoteIndex) -> QuoteStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        *out = ptr::null_mut();
        let path = read_str(path, "path")?;
        let store = VectorStore::load(Path::new(path))?;
        let id = &store.manifest().embedder_id;
        let embedder = offline_embedder_from_identity(id).ok_or_else(|| {
            Error::ManifestMismatch(format!("embedder {id:?} is not available offline"))
        })?;
        *out = Box::into_raw(Box::new(QuoteIndex { store, embedder }));
        Ok(())
    })
}

/// Free an index handle. NULL is ignored.
///
/// # Safety
/// `index` must come from [`quote_index_open`] and not have been closed.
#[no_mangle]
pub unsafe extern "C" fn quote_index_close(index: *mut QuoteIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of indexed documents.
///
/// # Safety
/// `index` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn quote_index_doc_count(index: *const QuoteIndex, out: *mut usize) -> QuoteStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| null_arg("index"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        *out = index.store.len();
        Ok(())
    })
}

/// The index manifest as JSON.
///
/// # Safety
/// `index` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn quote_index_manifest_json(
    index: *const QuoteIndex,
    out: *mut *mut c_char,
) -> QuoteStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| null_arg("index"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let json = serde_json::to_string(index.store.manifest()).expect("manifest serializes");
        write_string(out, json)
    })
}

/// Retrieve up to `k` contexts for `query`. `m` is the over-retrieval
/// multiplier used in quote mode. The result JSON has `query`, `contexts`
/// and `elapsed_ms`.
///
/// # Safety
/// `index` must be a live handle, `query` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn quote_index_query(
    index: *const QuoteIndex,
    query: *const c_char,
    mode: QuoteMode,
    k: usize,
    m: usize,
    out: *mut *mut c_char,
) -> QuoteStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| null_arg("index"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let query = read_str(query, "query")?;
        let config = match mode {
            QuoteMode::Naive => RetrievalConfig::new(RetrievalMode::Naive, k),
            QuoteMode::Quote => RetrievalConfig::quote(k, m),
        };
        let retriever = Retriever::new(&index.store, index.embedder.as_ref())?;
        let result = retriever.retrieve(query, &config)?;
        write_string(out, serde_json::to_string(&result).expect("result serializes"))
    })
}

/// Parse raw generator output into `{"pairs": [...], "malformed": n}`.
///
/// # Safety
/// Both strings must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn quote_parse_qa_lines(
    raw: *const c_char,
    chunk_id: *const c_char,
    out: *mut *mut c_char,
) -> QuoteStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let parsed = parse_qa_lines(read_str(raw, "raw")?, read_str(chunk_id, "chunk_id")?);
        let json = serde_json::json!({ "pairs": parsed.pairs, "malformed": parsed.malformed });
        write_string(out, json.to_string())
    })
}

/// Cosine similarity of two `len`-dimensional vectors.
///
/// # Safety
/// `a` and `b` must point to `len` floats and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn quote_cosine_similarity(
    a: *const f32,
    b: *const f32,
    len: usize,
    out: *mut f64,
) -> QuoteStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return Err(null_arg("a, b or out"));
        }
        let a = EmbeddingVector::new(std::slice::from_raw_parts(a, len).to_vec(), "ffi")?;
        let b = EmbeddingVector::new(std::slice::from_raw_parts(b, len).to_vec(), "ffi")?;
        *out = cosine_similarity(&a, &b)?;
        Ok(())
    })
}

#ifndef QUOTE_FFI_H
#define QUOTE_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. `QUOTE_STATUS_OK` is zero; everything else is an error.
 */
typedef enum QuoteStatus {
  QUOTE_STATUS_OK = 0,
  QUOTE_STATUS_INVALID_ARGUMENT = 1,
  QUOTE_STATUS_LOAD_ERROR = 2,
  QUOTE_STATUS_INDEX_CORRUPT = 3,
  QUOTE_STATUS_EMPTY_INDEX = 4,
  QUOTE_STATUS_MANIFEST_MISMATCH = 5,
  QUOTE_STATUS_BACKEND_ERROR = 6,
  QUOTE_STATUS_IO_ERROR = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  QUOTE_STATUS_INTERNAL_ERROR = 8,
} QuoteStatus;

/**
 * Retrieval strategy for [`quote_index_query`].
 */
typedef enum QuoteMode {
  QUOTE_MODE_NAIVE = 0,
  QUOTE_MODE_QUOTE = 1,
} QuoteMode;

/**
 * Opaque handle to a loaded index.
 */
typedef struct QuoteIndex QuoteIndex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last error on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *quote_last_error_message(void);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void quote_string_free(char *s);

/**
 * Load the index directory at `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QuoteStatus quote_index_open(const char *path, struct QuoteIndex **out);

/**
 * Free an index handle. NULL is ignored.
 *
 * # Safety
 * `index` must come from [`quote_index_open`] and not have been closed.
 */
void quote_index_close(struct QuoteIndex *index);

/**
 * Number of indexed documents.
 *
 * # Safety
 * `index` must be a live handle and `out` a valid pointer.
 */
enum QuoteStatus quote_index_doc_count(const struct QuoteIndex *index, size_t *out);

/**
 * The index manifest as JSON.
 *
 * # Safety
 * `index` must be a live handle and `out` a valid pointer.
 */
enum QuoteStatus quote_index_manifest_json(const struct QuoteIndex *index, char **out);

/**
 * Retrieve up to `k` contexts for `query`. `m` is the over-retrieval
 * multiplier used in quote mode. The result JSON has `query`, `contexts`
 * and `elapsed_ms`.
 *
 * # Safety
 * `index` must be a live handle, `query` NUL-terminated and `out` valid.
 */
enum QuoteStatus quote_index_query(const struct QuoteIndex *index,
                                   const char *query,
                                   enum QuoteMode mode,
                                   size_t k,
                                   size_t m,
                                   char **out);

/**
 * Parse raw generator output into `{"pairs": [...], "malformed": n}`.
 *
 * # Safety
 * Both strings must be NUL-terminated and `out` valid.
 */
enum QuoteStatus quote_parse_qa_lines(const char *raw, const char *chunk_id, char **out);

/**
 * Cosine similarity of two `len`-dimensional vectors.
 *
 * # Safety
 * `a` and `b` must point to `len` floats and `out` must be valid.
 */
enum QuoteStatus quote_cosine_similarity(const float *a, const float *b, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUOTE_FFI_H */

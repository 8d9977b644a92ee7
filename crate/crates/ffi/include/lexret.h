/* SPDX-License-Identifier: Apache-2.0 */

#ifndef LEXRET_H
#define LEXRET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LexretStatus {
  LEXRET_STATUS_OK = 0,
  LEXRET_STATUS_NULL_POINTER = 1,
  LEXRET_STATUS_INVALID_UTF8 = 2,
  LEXRET_STATUS_INVALID_ARGUMENT = 3,
  LEXRET_STATUS_IO = 4,
  LEXRET_STATUS_FORMAT = 5,
  LEXRET_STATUS_VERSION = 6,
  LEXRET_STATUS_CHECKSUM = 7,
  LEXRET_STATUS_TRUNCATED = 8,
  LEXRET_STATUS_BUFFER_TOO_SMALL = 9,
  LEXRET_STATUS_INTERNAL = 10,
} LexretStatus;

/*
 Loaded or built index.
 */
typedef struct LexretIndex LexretIndex;

/*
 Ranked hits of one search.
 */
typedef struct LexretResults LexretResults;

typedef struct LexretRect {
  uint32_t x;
  uint32_t y;
  uint32_t w;
  uint32_t h;
} LexretRect;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. Valid until the
 next lexret call on the same thread.
 */
const char *lexret_last_error_message(void);

/*
 Library version string (static).
 */
const char *lexret_version(void);

/*
 Load an index file written by `lexret index`.

 # Safety
 `path` must be a valid C string and `out` a valid pointer.
 */
enum LexretStatus lexret_index_load(const char *path, struct LexretIndex **out);

/*
 Build an index from a captions JSONL file with the default analyzer.

 # Safety
 `path` must be a valid C string and `out` a valid pointer.
 */
enum LexretStatus lexret_index_build_from_captions(const char *path, struct LexretIndex **out);

/*
 Build an index from `n` parallel arrays of image ids and document texts.

 # Safety
 `image_ids` and `texts` must each point to `n` valid C strings.
 */
enum LexretStatus lexret_index_build(const char *const *image_ids,
                                     const char *const *texts,
                                     size_t n,
                                     struct LexretIndex **out);

/*
 # Safety
 `index` must come from this library; `path` must be a valid C string.
 */
enum LexretStatus lexret_index_save(const struct LexretIndex *index, const char *path);

/*
 Number of documents; 0 for a null handle.

 # Safety
 `index` must be null or come from this library.
 */
size_t lexret_index_n_docs(const struct LexretIndex *index);

/*
 # Safety
 `index` must be null or come from this library, and not be used afterwards.
 */
void lexret_index_free(struct LexretIndex *index);

/*
 BM25 search returning at most `k` hits.

 # Safety
 `index` must come from this library, `query` must be a valid C string and
 `out` a valid pointer.
 */
enum LexretStatus lexret_search(const struct LexretIndex *index,
                                const char *query,
                                size_t k,
                                struct LexretResults **out);

/*
 # Safety
 `results` must be null or come from [`lexret_search`].
 */
size_t lexret_results_len(const struct LexretResults *results);

/*
 Documents with a positive score, before truncation to `k`.

 # Safety
 `results` must be null or come from [`lexret_search`].
 */
size_t lexret_results_total_hits(const struct LexretResults *results);

/*
 Image id of hit `i`, or null when out of range. Owned by `results`.

 # Safety
 `results` must be null or come from [`lexret_search`].
 */
const char *lexret_results_image_id(const struct LexretResults *results, size_t i);

/*
 Score of hit `i`, or NaN when out of range.

 # Safety
 `results` must be null or come from [`lexret_search`].
 */
double lexret_results_score(const struct LexretResults *results, size_t i);

/*
 # Safety
 `results` must be null or come from [`lexret_search`], and not be used afterwards.
 */
void lexret_results_free(struct LexretResults *results);

/*
 Crop rectangles of a built-in pattern (`none`, `crops17`, `crops40`) for a
 `width`×`height` image. `*out_len` always receives the crop count; when it
 exceeds `capacity` nothing is written and `BufferTooSmall` is returned.

 # Safety
 `pattern` must be a valid C string, `out` must have room for `capacity`
 rects (or be null when `capacity` is 0), `out_len` must be valid.
 */
enum LexretStatus lexret_crops_generate(const char *pattern,
                                        uint32_t width,
                                        uint32_t height,
                                        struct LexretRect *out,
                                        size_t capacity,
                                        size_t *out_len);

/*
 `w · max(cos(a, b), 0)` for two `dim`-dimensional vectors.

 # Safety
 `a` and `b` must point to `dim` doubles; `out` must be valid.
 */
enum LexretStatus lexret_clip_score(const double *a,
                                    const double *b,
                                    size_t dim,
                                    double w,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEXRET_H */

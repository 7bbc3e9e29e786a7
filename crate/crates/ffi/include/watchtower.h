#ifndef WATCHTOWER_H
#define WATCHTOWER_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WtOverflow {
  WT_OVERFLOW_BLOCK = 0,
  WT_OVERFLOW_DROP_OLDEST = 1,
  WT_OVERFLOW_LATEST_WINS = 2,
} WtOverflow;

typedef enum WtPayloadKind {
  WT_PAYLOAD_KIND_CAPTION_BATCH = 0,
  WT_PAYLOAD_KIND_SUMMARY = 1,
  WT_PAYLOAD_KIND_DECISION = 2,
} WtPayloadKind;

typedef enum WtSplitRatio {
  WT_SPLIT_RATIO_THREE_SEVEN = 0,
  WT_SPLIT_RATIO_ONE_ONE = 1,
  WT_SPLIT_RATIO_SEVEN_THREE = 2,
} WtSplitRatio;

/**
 * Result code returned by every fallible function.
 */
typedef enum WtStatus {
  WT_STATUS_OK = 0,
  WT_STATUS_NULL_POINTER = 1,
  WT_STATUS_INVALID_ARGUMENT = 2,
  WT_STATUS_INVALID_UTF8 = 3,
  WT_STATUS_CONFIG = 4,
  WT_STATUS_IO = 5,
  WT_STATUS_RUNTIME = 6,
  WT_STATUS_CLOSED = 7,
  WT_STATUS_NOT_READY = 8,
  WT_STATUS_FULL = 9,
  WT_STATUS_PANIC = 10,
} WtStatus;

/**
 * A loaded pipeline configuration with its stream, vocabulary and prompts.
 */
typedef struct WtPipeline WtPipeline;

/**
 * Bounded typed queue. Safe to share between threads.
 */
typedef struct WtQueue WtQueue;

/**
 * Entity vocabulary with alias folding.
 */
typedef struct WtVocabulary WtVocabulary;

typedef struct WtQueueStats {
  uint64_t published;
  uint64_t delivered;
  uint64_t dropped;
  uint64_t in_flight;
} WtQueueStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *wt_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void wt_string_free(char *s);

/**
 * Library version, statically allocated.
 */
const char *wt_version(void);

/**
 * ROC AUC with tied scores counted half. Needs both classes present.
 *
 * # Safety
 * `labels` and `scores` point to `n` elements; `out` is writable.
 */
enum WtStatus wt_auc(const uint8_t *labels, const double *scores, size_t n, double *out);

/**
 * Average precision with tied scores grouped. Needs both classes present.
 *
 * # Safety
 * As for [`wt_auc`].
 */
enum WtStatus wt_ap(const uint8_t *labels, const double *scores, size_t n, double *out);

/**
 * Sum of BLEU-1..4 for one candidate against its references.
 *
 * # Safety
 * Strings are NUL-terminated; `refs` points to `n_refs` of them.
 */
enum WtStatus wt_bleu_cumulative(const char *candidate,
                                 const char *const *refs,
                                 size_t n_refs,
                                 double *out);

/**
 * ROUGE-L F-measure, best over references.
 *
 * # Safety
 * As for [`wt_bleu_cumulative`].
 */
enum WtStatus wt_rouge_l(const char *candidate,
                         const char *const *refs,
                         size_t n_refs,
                         double *out);

/**
 * Half-open frame interval of window `window_seq`.
 *
 * # Safety
 * `start_out` and `end_out` are writable.
 */
enum WtStatus wt_window_bounds(uint64_t window_seq,
                               uint64_t window_len,
                               uint64_t stride,
                               uint64_t *start_out,
                               uint64_t *end_out);

/**
 * Writes `k` evenly spaced ordinals from `[start, end)` into `out`.
 *
 * # Safety
 * `out` points to at least `k` writable elements.
 */
enum WtStatus wt_uniform_sample(uint64_t start, uint64_t end, size_t k, uint64_t *out);

/**
 * Splits `n` ordinals (a multiple of 10) into historical and adjacent
 * parts; `historical_len_out` receives the prefix length. When
 * `sample_out` is non-NULL it receives `k` ordinals resampled from the
 * adjacent part.
 *
 * # Safety
 * `historical_len_out` is writable; `sample_out` is NULL or has `k` slots.
 */
enum WtStatus wt_split_segment(size_t n,
                               enum WtSplitRatio ratio,
                               size_t k,
                               size_t *historical_len_out,
                               uint64_t *sample_out);

/**
 * Loads and validates a TOML config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum WtStatus wt_pipeline_load(const char *path, uint64_t seed, struct WtPipeline **out);

/**
 * Runs the pipeline on virtual time and returns the decisions as JSONL.
 *
 * `latency_out`, if non-NULL, receives the detection latency in seconds
 * or a negative value when the stream has no onset or no positive decision.
 *
 * # Safety
 * `pipeline` must be a live handle; `jsonl_out` must be writable.
 */
enum WtStatus wt_pipeline_simulate(const struct WtPipeline *pipeline,
                                   char **jsonl_out,
                                   double *latency_out);

/**
 * Frees a pipeline handle.
 *
 * # Safety
 * `pipeline` must come from `wt_pipeline_load` and not have been freed.
 */
void wt_pipeline_free(struct WtPipeline *pipeline);

/**
 * Creates a queue. `capacity` below 1 is raised to 1.
 *
 * # Safety
 * `out` must be writable.
 */
enum WtStatus wt_queue_new(enum WtPayloadKind kind,
                           size_t capacity,
                           enum WtOverflow overflow,
                           struct WtQueue **out);

/**
 * Publishes a payload given as JSON (`{"kind": ..., "body": ...}`).
 *
 * With `wait` zero a full `Block` queue returns `WT_STATUS_FULL`;
 * otherwise the call blocks until space frees up.
 *
 * # Safety
 * `queue` must be live; `payload_json` NUL-terminated; `seq_out` NULL or writable.
 */
enum WtStatus wt_queue_publish_json(const struct WtQueue *queue_ptr,
                                    const char *payload_json,
                                    double produced_ts,
                                    bool wait,
                                    uint64_t *seq_out);

/**
 * Takes the next envelope as JSON, waiting up to `timeout_ms`
 * (negative waits indefinitely).
 *
 * # Safety
 * `queue` must be live; `json_out` writable.
 */
enum WtStatus wt_queue_consume_json(const struct WtQueue *queue_ptr,
                                    int64_t timeout_ms,
                                    char **json_out);

/**
 * # Safety
 * `queue` must be live; `stats_out` writable.
 */
enum WtStatus wt_queue_stats(const struct WtQueue *queue_ptr, struct WtQueueStats *stats_out);

/**
 * Closes the queue; pending items stay consumable.
 *
 * # Safety
 * `queue` must be live.
 */
enum WtStatus wt_queue_close(const struct WtQueue *queue_ptr);

/**
 * # Safety
 * `queue` must come from `wt_queue_new`, not be freed, and have no
 * other thread still using it.
 */
void wt_queue_free(struct WtQueue *queue_ptr);

/**
 * Parses a vocabulary: one entity per line, aliases separated by `|`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum WtStatus wt_vocab_parse(const char *text, struct WtVocabulary **out);

/**
 * Number of entities, or 0 for NULL.
 *
 * # Safety
 * `vocab` must be NULL or a live handle.
 */
size_t wt_vocab_len(const struct WtVocabulary *vocab);

/**
 * Whole-word occurrence counts per entity over `n_texts` strings.
 *
 * `counts` must have room for `wt_vocab_len(vocab)` entries.
 *
 * # Safety
 * `texts` points to `n_texts` NUL-terminated strings; `counts` to
 * `counts_len` writable integers.
 */
enum WtStatus wt_vocab_count(const struct WtVocabulary *vocab,
                             const char *const *texts,
                             size_t n_texts,
                             uint32_t *counts,
                             size_t counts_len);

/**
 * Splits nonzero entities into main (`1`) and redundant (`2`) by the
 * prefix-cut rule; zero-count entities get `0`.
 *
 * # Safety
 * `counts` and `classes` each point to `n` elements.
 */
enum WtStatus wt_screen_entities(const uint32_t *counts, size_t n, uint32_t tau, uint8_t *classes);

/**
 * Frees a vocabulary handle.
 *
 * # Safety
 * `vocab` must come from `wt_vocab_parse` and not have been freed.
 */
void wt_vocab_free(struct WtVocabulary *vocab);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WATCHTOWER_H */

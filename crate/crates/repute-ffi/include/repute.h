/* C ABI for the repute reputation engine. */

#ifndef REPUTE_H
#define REPUTE_H

/* Generated by cbindgen from repute-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  REPUTE_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  REPUTE_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  REPUTE_STATUS_INVALID_UTF8 = 2,
  /**
   * JSON could not be parsed.
   */
  REPUTE_STATUS_PARSE_ERROR = 3,
  /**
   * Input violated a model invariant (bad config, bad record, ...).
   */
  REPUTE_STATUS_VALIDATION_ERROR = 4,
  /**
   * Period end does not advance past the current state time.
   */
  REPUTE_STATUS_TIME_ERROR = 5,
  /**
   * No member carries positive floored reputation.
   */
  REPUTE_STATUS_NO_ELIGIBLE_PROPOSER = 6,
  /**
   * The caller-provided buffer is too small.
   */
  REPUTE_STATUS_BUFFER_TOO_SMALL = 7,
} ReputeStatus;

/**
 * Opaque engine handle: configuration, current reputation state, and the
 * rating records buffered for the next recalculation period.
 */
typedef struct ReputeEngine ReputeEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create an engine from a JSON configuration object (pass null for the
 * defaults) anchored at origin tick `origin`. Returns null on failure with
 * `status` (when non-null) and the thread error message set.
 *
 * # Safety
 * `config_json`, when non-null, must point to a NUL-terminated string valid
 * for the duration of the call. `status` may be null.
 */
ReputeEngine *repute_engine_new(const char *config_json, uint64_t origin, ReputeStatus *status);

/**
 * Release an engine handle. Null is ignored.
 *
 * # Safety
 * `engine` must be a pointer returned by [`repute_engine_new`] that has not
 * been freed yet.
 */
void repute_engine_free(ReputeEngine *engine);

/**
 * Buffer one rating record, given as the JSON object used in rating logs
 * (keys kind/from/to/time/value/weight and optional aspect/category/event).
 * The record is validated immediately; it takes effect at the next
 * [`repute_engine_advance`].
 *
 * # Safety
 * `engine` must be a live engine handle; `record_json` must be a valid
 * NUL-terminated string.
 */
ReputeStatus repute_engine_add_rating_json(ReputeEngine *engine, const char *record_json);

/**
 * Number of records buffered for the next period.
 *
 * # Safety
 * `engine` must be a live engine handle.
 */
uint64_t repute_engine_pending_count(const ReputeEngine *engine);

/**
 * Run one recalculation period over the buffered records, ending at tick
 * `t_n`. On success the buffer is cleared and the state advances.
 *
 * # Safety
 * `engine` must be a live engine handle.
 */
ReputeStatus repute_engine_advance(ReputeEngine *engine, uint64_t t_n);

/**
 * Effective reputation of a member: its state entry, or the configured
 * default when the member is unknown.
 *
 * # Safety
 * `engine` must be a live engine handle, `member` a valid NUL-terminated
 * string, `out` a writable f64 pointer.
 */
ReputeStatus repute_engine_reputation(const ReputeEngine *engine, const char *member, double *out);

/**
 * Current state as the snapshot JSON document
 * `{as_of, origin, entries, hash}`. Free with [`repute_string_free`].
 *
 * # Safety
 * `engine` must be a live engine handle; `status` may be null.
 */
char *repute_engine_state_json(const ReputeEngine *engine, ReputeStatus *status);

/**
 * Canonical hex digest of the current state, written NUL-terminated into
 * `buf` (65 bytes suffice).
 *
 * # Safety
 * `engine` must be a live engine handle; `buf` must point to `len` writable
 * bytes.
 */
ReputeStatus repute_engine_state_hash(const ReputeEngine *engine, char *buf, uintptr_t len);

/**
 * Proof-of-reputation proposer selection over the current state: writes the
 * chosen member id NUL-terminated into `buf`. Selection probability is
 * proportional to floored reputation, deterministic in `seed`.
 *
 * # Safety
 * `engine` must be a live engine handle; `buf` must point to `len` writable
 * bytes.
 */
ReputeStatus repute_engine_select_proposer(const ReputeEngine *engine,
                                           uint64_t seed,
                                           char *buf,
                                           uintptr_t len);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be a pointer returned by a repute function and not yet freed.
 */
void repute_string_free(char *s);

/**
 * Detail message of the most recent error on this thread, or null. Free
 * with [`repute_string_free`].
 */
char *repute_last_error(void);

/**
 * Static name of a status code (never freed by the caller).
 */
const char *repute_status_name(ReputeStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPUTE_H */

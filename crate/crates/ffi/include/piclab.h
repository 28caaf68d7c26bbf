/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PICLAB_H
#define PICLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum PiclabStatus {
  PICLAB_STATUS_OK = 0,
  PICLAB_STATUS_INVALID_ARGUMENT = 1,
  PICLAB_STATUS_BUDGET_EXCEEDED = 2,
  PICLAB_STATUS_MODEL_VIOLATION = 3,
  PICLAB_STATUS_NOT_OBLIVIOUS = 4,
  PICLAB_STATUS_INTERNAL = 5,
} PiclabStatus;

/**
 * Opaque protocol handle.
 */
typedef struct PiclabProtocol PiclabProtocol;

/**
 * Measures under one input distribution, in bits.
 */
typedef struct PiclabMeasures {
  uint64_t cc;
  double acc;
  double ic;
  double pic;
  double pic_random_term;
  double transcript_entropy;
  double spy_info;
  /**
   * NaN when the protocol declares no functions.
   */
  double privacy_leakage;
} PiclabMeasures;

/**
 * Summary of an exact compression check.
 */
typedef struct PiclabCompression {
  double ic;
  double entropy_sum;
  double expected_moves;
  double expected_stages;
  double acc;
  double bound;
  bool profiles_exact;
} PiclabCompression;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a built-in protocol. Zero for `k`, `n` or `q` selects the
 * default. The handle must be released with [`piclab_protocol_free`].
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PiclabStatus piclab_protocol_from_registry(const char *name,
                                                uint32_t k,
                                                uint32_t n,
                                                uint32_t q,
                                                struct PiclabProtocol **out);

/**
 * Parses a protocol-tree JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PiclabStatus piclab_protocol_from_tree_json(const char *json, struct PiclabProtocol **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `p` must come from this library and not be used afterwards.
 */
void piclab_protocol_free(struct PiclabProtocol *p);

/**
 * Number of players, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
uint32_t piclab_protocol_players(const struct PiclabProtocol *p);

/**
 * Measures under the uniform input distribution.
 *
 * # Safety
 * `p` must be a live handle and `out` a valid pointer.
 */
enum PiclabStatus piclab_measure_uniform(const struct PiclabProtocol *p,
                                         uint64_t budget,
                                         struct PiclabMeasures *out);

/**
 * Measures under a distribution given as JSON: an array of
 * `[[input, ...], numerator, denominator]` rows.
 *
 * # Safety
 * `p` must be a live handle, `dist_json` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum PiclabStatus piclab_measure_with_distribution(const struct PiclabProtocol *p,
                                                   const char *dist_json,
                                                   uint64_t budget,
                                                   struct PiclabMeasures *out);

/**
 * Full measure report as a JSON string. A null distribution means
 * uniform. Free the string with [`piclab_string_free`].
 *
 * # Safety
 * `p` must be a live handle, `dist_json` null or a NUL-terminated string,
 * and `out` a valid pointer.
 */
enum PiclabStatus piclab_report_json(const struct PiclabProtocol *p,
                                     const char *dist_json,
                                     uint64_t budget,
                                     double tolerance,
                                     char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void piclab_string_free(char *s);

/**
 * Whether every execution follows one communication pattern.
 *
 * # Safety
 * `p` must be a live handle and `out` a valid pointer.
 */
enum PiclabStatus piclab_is_oblivious(const struct PiclabProtocol *p, uint64_t budget, bool *out);

/**
 * Runs the staged compression with exact lcp boxes on every input under
 * the uniform distribution. Private tapes are made public first.
 *
 * # Safety
 * `p` must be a live handle and `out` a valid pointer.
 */
enum PiclabStatus piclab_compress_exact(const struct PiclabProtocol *p,
                                        uint64_t budget,
                                        struct PiclabCompression *out);

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *piclab_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PICLAB_H */

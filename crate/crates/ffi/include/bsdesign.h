#ifndef BSDESIGN_H
#define BSDESIGN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define BSD_MODEL_LOGIT 0

#define BSD_MODEL_PROBIT 1

#define BSD_MODEL_CLOGLOG 2

/**
 * Estimation method I: all cumulated data.
 */
#define BSD_METHOD_ALL 1

/**
 * Estimation method II: endpoints, anchor and final probe.
 */
#define BSD_METHOD_SELECTED 2

typedef enum BsdStatus {
  BSD_STATUS_OK = 0,
  BSD_STATUS_INVALID_ARGUMENT = 1,
  BSD_STATUS_NULL_POINTER = 2,
  BSD_STATUS_PRECONDITION = 3,
  BSD_STATUS_NUMERICAL_FAILURE = 4,
  BSD_STATUS_INVALID_INTERVAL = 5,
  BSD_STATUS_DEGENERATE_RESPONSE = 6,
  BSD_STATUS_ORACLE = 7,
  BSD_STATUS_SERIALIZATION = 8,
  BSD_STATUS_IO = 9,
  BSD_STATUS_PANIC = 10,
} BsdStatus;

typedef enum BsdPhase {
  BSD_PHASE_ENDPOINT_CHECK = 0,
  BSD_PHASE_BISECTION = 1,
  BSD_PHASE_PROBING = 2,
  BSD_PHASE_DONE = 3,
  BSD_PHASE_FAILED = 4,
} BsdPhase;

/**
 * Opaque search session.
 */
typedef struct BsdSession BsdSession;

typedef struct BsdDesignPoints {
  double z1;
  double z2;
  double p1;
  double p2;
} BsdDesignPoints;

typedef struct BsdFit {
  double a;
  double b;
  double se_a;
  double se_b;
  double log_likelihood;
  bool converged;
} BsdFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bsd_last_error_message(void);

/**
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum BsdStatus bsd_cdf(uint32_t model_code, double eta, double *out);

/**
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum BsdStatus bsd_pdf(uint32_t model_code, double eta, double *out);

/**
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum BsdStatus bsd_quantile(uint32_t model_code, double p, double *out);

/**
 * Canonical D-optimal levels and their response probabilities.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum BsdStatus bsd_d_optimal(uint32_t model_code, struct BsdDesignPoints *out);

/**
 * Probability that no MLE exists with `n` (even) measurements split over the
 * D-optimal levels.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum BsdStatus bsd_prob_no_mle(uint32_t model_code, uint64_t n, double *out);

/**
 * Stage size from the published cost model for interval length `d` and
 * stage cost `stage_cost`.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum BsdStatus bsd_predict_stage_size(uint32_t model_code,
                                      double d,
                                      double stage_cost,
                                      uint64_t *out);

double bsd_total_cost(double stages, double stage_size, double stage_cost);

/**
 * Starts a search on `[x_min, x_max]` with default limits.
 *
 * # Safety
 * `out` must be NULL or valid for writes. The session written there must be
 * released with `bsd_session_free`.
 */
enum BsdStatus bsd_session_new(double x_min,
                               double x_max,
                               uint64_t stage_size,
                               uint64_t tie_seed,
                               struct BsdSession **out);

/**
 * Restores a session from a JSON snapshot.
 *
 * # Safety
 * `json` must be NULL or a NUL-terminated string; `out` must be NULL or valid
 * for writes.
 */
enum BsdStatus bsd_session_from_json(const char *json, struct BsdSession **out);

/**
 * Serializes the session. Free the string with `bsd_string_free`.
 *
 * # Safety
 * `session` must be NULL or a live session; `out` must be NULL or valid for
 * writes.
 */
enum BsdStatus bsd_session_to_json(const struct BsdSession *session_ptr, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void bsd_string_free(char *s);

/**
 * Level at which the next stage must be measured.
 *
 * # Safety
 * `session` must be NULL or a live session; `out` must be NULL or valid for
 * writes.
 */
enum BsdStatus bsd_session_next_level(const struct BsdSession *session_ptr, double *out);

/**
 * Records `successes` out of the stage size at the current level. `phase_out`
 * may be NULL.
 *
 * # Safety
 * `session` must be NULL or a live session; `phase_out` must be NULL or valid
 * for writes.
 */
enum BsdStatus bsd_session_apply_response(struct BsdSession *session_ptr,
                                          uint64_t successes,
                                          enum BsdPhase *phase_out);

/**
 * Current phase; a NULL session reports `Failed`.
 *
 * # Safety
 * `session` must be NULL or a live session.
 */
enum BsdPhase bsd_session_phase(const struct BsdSession *session_ptr);

/**
 * Number of completed stages; 0 for a NULL session.
 *
 * # Safety
 * `session` must be NULL or a live session.
 */
uint64_t bsd_session_stage_count(const struct BsdSession *session_ptr);

/**
 * Diagnostic of a failed session, or NULL. Free with `bsd_string_free`.
 *
 * # Safety
 * `session` must be NULL or a live session.
 */
char *bsd_session_failure(const struct BsdSession *session_ptr);

/**
 * Fits the model on a finished search with `BSD_METHOD_ALL` or
 * `BSD_METHOD_SELECTED`.
 *
 * # Safety
 * `session` must be NULL or a live session; `out` must be NULL or valid for
 * writes.
 */
enum BsdStatus bsd_session_fit(const struct BsdSession *session_ptr,
                               uint32_t model_code,
                               uint32_t method,
                               struct BsdFit *out);

/**
 * # Safety
 * `session` must be NULL or a session from this library not yet freed.
 */
void bsd_session_free(struct BsdSession *session_ptr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSDESIGN_H */

#ifndef HYPERBERRY_H
#define HYPERBERRY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HbStatus {
  HB_STATUS_OK = 0,
  HB_STATUS_INVALID_ARGUMENT = 1,
  HB_STATUS_GATE_REFUSED = 2,
  HB_STATUS_NULL_POINTER = 3,
  HB_STATUS_INTERNAL = 4,
} HbStatus;

/**
 * Opaque calibrated or proof-traced constant set.
 */
typedef struct HbConstants HbConstants;

/**
 * Opaque `Hyp(n; M, N)` parameters.
 */
typedef struct HbParams HbParams;

typedef struct HbMoments {
  double mean;
  double variance;
  double sigma2;
} HbMoments;

typedef struct HbCertified {
  double log_main;
  double rem_bound;
  double value;
  double lo;
  double hi;
} HbCertified;

typedef struct HbBoundProfile {
  double f_bar;
  double a1;
  double delta;
  double sigma;
  bool gate_ok;
} HbBoundProfile;

typedef struct HbDelta {
  double delta_sup;
  uint64_t argmax_k;
  double sigma;
  double delta_times_sigma;
} HbDelta;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the thread.
 */
const char *hb_last_error_message(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum HbStatus hb_params_new(uint64_t n, uint64_t m, uint64_t pop, struct HbParams **out);

/**
 * # Safety
 * `p` must be null or a handle from [`hb_params_new`] not yet freed.
 */
void hb_params_free(struct HbParams *p);

/**
 * `P(X = k)`; zero outside the support.
 *
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_pmf(const struct HbParams *p, int64_t k, double *out);

/**
 * `P(X <= k)`.
 *
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_cdf(const struct HbParams *p, int64_t k, double *out);

/**
 * `P(X > k)`.
 *
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_sf(const struct HbParams *p, int64_t k, double *out);

/**
 * Exact `P(X = k)` as `"num/den"` on the rational backend, decimal
 * otherwise. Free the result with [`hb_string_free`].
 *
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_pmf_string(const struct HbParams *p, int64_t k, char **out);

/**
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_moments(const struct HbParams *p, struct HbMoments *out);

/**
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_mode(const struct HbParams *p, uint64_t *out);

/**
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_certified_pmf(const struct HbParams *p,
                               int64_t k,
                               double delta,
                               struct HbCertified *out);

/**
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_bound_profile(const struct HbParams *p, struct HbBoundProfile *out);

/**
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HbStatus hb_delta(const struct HbParams *p, struct HbDelta *out);

/**
 * Parse and validate a constant set from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum HbStatus hb_constants_from_json(const char *json, struct HbConstants **out);

/**
 * # Safety
 * `c` must be a live constants handle and `out` writable.
 */
enum HbStatus hb_constants_to_json(const struct HbConstants *c, char **out);

/**
 * # Safety
 * `c` must be null or a handle from [`hb_constants_from_json`] not yet freed.
 */
void hb_constants_free(struct HbConstants *c);

/**
 * # Safety
 * Handles must be live and `out` writable.
 */
enum HbStatus hb_uniform_bound(const struct HbParams *p, const struct HbConstants *c, double *out);

/**
 * Refuses with `GateRefused` unless `delta * sigma > 1`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum HbStatus hb_nonuniform_bound(const struct HbParams *p,
                                  const struct HbConstants *c,
                                  double x,
                                  double *out);

/**
 * Bound on `P(|X - np|/sigma >= x)` for `x > 0`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum HbStatus hb_tail_bound(const struct HbParams *p,
                            const struct HbConstants *c,
                            double x,
                            double *out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void hb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPERBERRY_H */

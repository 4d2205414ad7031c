#ifndef MFINV_H
#define MFINV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfinvStatus {
  MFINV_STATUS_OK = 0,
  MFINV_STATUS_NULL_POINTER = 1,
  MFINV_STATUS_VALIDATION = 2,
  MFINV_STATUS_DOMAIN = 3,
  MFINV_STATUS_NUMERICAL = 4,
  MFINV_STATUS_RESOURCE = 5,
  MFINV_STATUS_FIT = 6,
  MFINV_STATUS_DETECTION = 7,
  MFINV_STATUS_INVERSION = 8,
  MFINV_STATUS_DEGENERATE = 9,
  MFINV_STATUS_IO = 10,
  MFINV_STATUS_PANIC = 11,
} MfinvStatus;

/**
 * Multiplicative cascade specification.
 */
typedef struct MfinvCascade MfinvCascade;

/**
 * Scaling exponents with standard errors.
 */
typedef struct MfinvCurve MfinvCurve;

/**
 * Result of the two-way inversion check.
 */
typedef struct MfinvReport MfinvReport;

/**
 * Nonnegative volatility series.
 */
typedef struct MfinvSeries MfinvSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL.
 * Valid until the next call into this library from the same thread.
 */
const char *mfinv_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mfinv_version(void);

/**
 * Creates a cascade from `n` weights and ratios. `ratios` may be NULL
 * for equal ratios `1/n`.
 *
 * # Safety
 * `weights` (and `ratios` when non-NULL) must point to `n` doubles;
 * `out` must be writable.
 */
enum MfinvStatus mfinv_cascade_new(const double *weights,
                                   const double *ratios,
                                   size_t n,
                                   struct MfinvCascade **out);

/**
 * # Safety
 * `spec` must be NULL or a handle from `mfinv_cascade_new`, freed once.
 */
void mfinv_cascade_free(struct MfinvCascade *spec);

/**
 * Analytic `tau(q)`.
 *
 * # Safety
 * `spec` must be a live handle and `out` writable.
 */
enum MfinvStatus mfinv_cascade_tau(const struct MfinvCascade *spec, double q, double *out);

/**
 * Analytic `theta(p)`.
 *
 * # Safety
 * `spec` must be a live handle and `out` writable.
 */
enum MfinvStatus mfinv_cascade_theta(const struct MfinvCascade *spec, double p, double *out);

/**
 * Copies `n` samples into a new series.
 *
 * # Safety
 * `values` must point to `n` doubles and `out` be writable.
 */
enum MfinvStatus mfinv_series_new(const double *values, size_t n, struct MfinvSeries **out);

/**
 * Cascade masses at `depth` as a series. `seed` is used only when
 * `shuffle` is true.
 *
 * # Safety
 * `spec` must be a live handle and `out` writable.
 */
enum MfinvStatus mfinv_series_from_cascade(const struct MfinvCascade *spec,
                                           uint32_t depth,
                                           bool shuffle,
                                           uint64_t seed,
                                           struct MfinvSeries **out);

/**
 * Number of samples, or 0 for NULL.
 *
 * # Safety
 * `series` must be NULL or a live handle.
 */
size_t mfinv_series_len(const struct MfinvSeries *series);

/**
 * # Safety
 * `series` must be NULL or a handle from this library, freed once.
 */
void mfinv_series_free(struct MfinvSeries *series);

/**
 * `ln sum w^q` computed without underflow.
 *
 * # Safety
 * `weights` must point to `n` doubles and `out` be writable.
 */
enum MfinvStatus mfinv_log_moment_sum(const double *weights, size_t n, double q, double *out);

/**
 * `tau(q)` by box counting over orders `q_min..=q_max` in steps of
 * `q_step`, with the scaling range detected automatically.
 *
 * # Safety
 * `series` must be a live handle and `out` writable.
 */
enum MfinvStatus mfinv_direct_exponents(const struct MfinvSeries *series,
                                        double q_min,
                                        double q_max,
                                        double q_step,
                                        struct MfinvCurve **out);

/**
 * `theta(p)` from exit times, with the scaling range detected
 * automatically.
 *
 * # Safety
 * `series` must be a live handle and `out` writable.
 */
enum MfinvStatus mfinv_inverse_exponents(const struct MfinvSeries *series,
                                         double p_min,
                                         double p_max,
                                         double p_step,
                                         struct MfinvCurve **out);

/**
 * Number of fitted orders, or 0 for NULL.
 *
 * # Safety
 * `curve` must be NULL or a live handle.
 */
size_t mfinv_curve_len(const struct MfinvCurve *curve);

/**
 * Reads entry `i`. Any of the output pointers may be NULL.
 *
 * # Safety
 * `curve` must be a live handle; non-NULL outputs must be writable.
 */
enum MfinvStatus mfinv_curve_get(const struct MfinvCurve *curve,
                                 size_t i,
                                 double *order,
                                 double *exponent,
                                 double *stderr);

/**
 * # Safety
 * `curve` must be NULL or a handle from this library, freed once.
 */
void mfinv_curve_free(struct MfinvCurve *curve);

/**
 * Compares `tau(q)` with `-theta^-1(-q)` and `theta(p)` with
 * `-tau^-1(-p)`.
 *
 * # Safety
 * Both curves must be live handles and `out` writable.
 */
enum MfinvStatus mfinv_inversion_check(const struct MfinvCurve *direct,
                                       const struct MfinvCurve *inverse,
                                       struct MfinvReport **out);

/**
 * Summary of a report. Any of the output pointers may be NULL.
 *
 * # Safety
 * `report` must be a live handle; non-NULL outputs must be writable.
 */
enum MfinvStatus mfinv_report_summary(const struct MfinvReport *report,
                                      double *max_abs_diff,
                                      bool *within_error_bars,
                                      double *coverage);

/**
 * # Safety
 * `report` must be NULL or a handle from this library, freed once.
 */
void mfinv_report_free(struct MfinvReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFINV_H */

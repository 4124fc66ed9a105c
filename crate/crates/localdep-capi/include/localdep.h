/* C interface for the localdep dependence-measure library. */

#ifndef LOCALDEP_H
#define LOCALDEP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every `ld_*` computation.
typedef enum LdStatus {
  // Success.
  LdOk = 0,
  // A required pointer argument was null.
  LdNullPointer = 1,
  // A parameter was outside its domain (epsilon, k, bins, correlation).
  LdInvalidArgument = 2,
  // Fewer than two observations.
  LdInsufficientData = 3,
  // A coordinate was NaN or infinite.
  LdNonFinite = 4,
  // The statistic is undefined on this input (constant column).
  LdDegenerate = 5,
  // The quadratic-cost guard refused the input size.
  LdGuardExceeded = 6,
  // Internal failure (a bug; never expected).
  LdInternal = 7,
} LdStatus;

// Opaque sample handle.
typedef struct LdSample LdSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a sample from two arrays of length `len`. On success writes a
// handle to `out`; free it with [`ld_sample_free`].
//
// # Safety
// `xs` and `ys` must point to `len` readable doubles; `out` must be a valid
// pointer.
enum LdStatus ld_sample_create(const double *xs,
                               const double *ys,
                               size_t len,
                               struct LdSample **out);

// Frees a sample handle. Null is a no-op.
//
// # Safety
// `sample` must be a handle from [`ld_sample_create`], freed at most once.
void ld_sample_free(struct LdSample *sample);

// Number of observations in the sample.
//
// # Safety
// `sample` must be a live handle; `out` must be valid.
enum LdStatus ld_sample_len(const struct LdSample *sample, size_t *out);

// Rank correlation (adjacent rank differences after x-ordering).
//
// # Safety
// `sample` must be a live handle; `out` must be valid.
enum LdStatus ld_chatterjee_xi(const struct LdSample *sample, uint64_t tie_seed, double *out);

// Sort-based large-n path; bit-identical to [`ld_chatterjee_xi`].
//
// # Safety
// `sample` must be a live handle; `out` must be valid.
enum LdStatus ld_chatterjee_xi_large(const struct LdSample *sample, uint64_t tie_seed, double *out);

// Quadratic reference implementation (guarded at n <= 5000 unless `force`).
//
// # Safety
// `sample` must be a live handle; `out` must be valid.
enum LdStatus ld_chatterjee_xi_bruteforce(const struct LdSample *sample,
                                          uint64_t tie_seed,
                                          bool force,
                                          double *out);

// Mean absolute adjacent concomitant difference.
//
// # Safety
// `sample` must be a live handle; `out` must be valid.
enum LdStatus ld_adjacent_l1(const struct LdSample *sample, uint64_t tie_seed, double *out);

// L1 residual at fixed epsilon on the rank scale (the sample is passed
// through the probability integral transform first). Writes `zeta`; `xi`
// (optional) receives `1 - 4 zeta`.
//
// # Safety
// `sample` must be a live handle; `out_zeta` must be valid; `out_xi` may be
// null.
enum LdStatus ld_zeta_eps(const struct LdSample *sample,
                          double epsilon,
                          double *out_zeta,
                          double *out_xi);

// Shrinking-window L1 residual (rank-adjacent neighbors).
//
// # Safety
// `sample` must be a live handle; `out_zeta` must be valid; `out_xi` may be
// null.
enum LdStatus ld_zeta_limit(const struct LdSample *sample, double *out_zeta, double *out_xi);

// Normalized L2 residual from the include-self regressogram (`bins = 0`
// selects the `ceil(n^(1/3))` default).
//
// # Safety
// `sample` must be a live handle; `out` must be valid.
enum LdStatus ld_eta2_binned(const struct LdSample *sample, size_t bins, double *out);

// Normalized L2 residual from the leave-one-out kNN fit (`k = 0` selects
// the `ceil(sqrt n)` default).
//
// # Safety
// `sample` must be a live handle; `out` must be valid.
enum LdStatus ld_eta2_knn(const struct LdSample *sample, size_t k, double *out);

// Squared Pearson correlation (OLS R^2).
//
// # Safety
// `sample` must be a live handle; `out` must be valid.
enum LdStatus ld_r_squared(const struct LdSample *sample, double *out);

// Library version as a static C string.
const char *ld_version(void);

// Human-readable description of a status code (static storage).
const char *ld_status_message(enum LdStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOCALDEP_H */

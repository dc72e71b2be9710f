#ifndef ELG_FFI_H
#define ELG_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum ElgStatus {
  ELG_OK = 0,
  ELG_ERR_DOMAIN = 1,
  ELG_ERR_NON_CONVERGENCE = 2,
  ELG_ERR_SINGULAR = 3,
  ELG_ERR_DEGENERATE_DATA = 4,
  ELG_ERR_PARSE = 5,
  ELG_ERR_IO = 6,
  ELG_ERR_NULL_POINTER = 7,
  ELG_ERR_PANIC = 8,
} ElgStatus;

// Null hypothesis for [`elg_lr_test`].
typedef enum ElgNull {
  // alpha = 1
  ELG_NULL_LG = 0,
  // alpha = 1, p = 0
  ELG_NULL_LINDLEY = 1,
} ElgNull;

// Opaque sample of positive failure times.
typedef struct ElgDataset ElgDataset;

// Opaque maximum likelihood fit.
typedef struct ElgFit ElgFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failing call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *elg_last_error(void);

// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_pdf_eval(double alpha, double theta, double p, double x, double *out);

// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_cdf_eval(double alpha, double theta, double p, double x, double *out);

// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_survival_eval(double alpha, double theta, double p, double x, double *out);

// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_hazard_eval(double alpha, double theta, double p, double x, double *out);

// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_quantile_eval(double alpha, double theta, double p, double u, double *out);

// Raw moment `E(X^n)`, `n >= 1`.
//
// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_moment_eval(double alpha, double theta, double p, uint32_t n, double *out);

// Writes `n` seeded draws into `buffer`, which must hold `n` doubles.
//
// # Safety
// `buffer` must be valid for `n` writes.
enum ElgStatus elg_sample_fill(double alpha,
                               double theta,
                               double p,
                               uintptr_t n,
                               uint64_t seed,
                               double *buffer);

// Copies `n` values into a new dataset handle.
//
// # Safety
// `values` must be valid for `n` reads.
enum ElgStatus elg_dataset_new(const double *values, uintptr_t n, struct ElgDataset **out);

// Releases a dataset handle. NULL is ignored.
//
// # Safety
// `ds` must come from [`elg_dataset_new`] and not be used afterwards.
void elg_dataset_free(struct ElgDataset *ds);

// # Safety
// Pointer arguments must be NULL or valid for their stated use.
uintptr_t elg_dataset_len(const struct ElgDataset *ds);

// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_log_likelihood(const struct ElgDataset *ds,
                                  double alpha,
                                  double theta,
                                  double p,
                                  double *out);

// Newton-Raphson fit from a grid of starting points.
//
// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_fit_newton(const struct ElgDataset *ds, struct ElgFit **out);

// EM fit started at `(alpha, theta, p)` with `0 < p < 1`. A zero
// `max_iterations` means 200000.
//
// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_fit_em(const struct ElgDataset *ds,
                          double alpha,
                          double theta,
                          double p,
                          uintptr_t max_iterations,
                          struct ElgFit **out);

// Releases a fit handle. NULL is ignored.
//
// # Safety
// `fit` must come from a fitting function and not be used afterwards.
void elg_fit_free(struct ElgFit *fit);

// Estimates, log-likelihood and convergence flag of a fit.
//
// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_fit_estimates(const struct ElgFit *fit,
                                 double *alpha,
                                 double *theta,
                                 double *p,
                                 double *loglik,
                                 bool *converged);

// Writes the row-major 3x3 covariance matrix of `(alpha, theta, p)`.
//
// # Safety
// `out9` must be valid for 9 writes.
enum ElgStatus elg_fit_vcov(const struct ElgFit *fit, double *out9);

// Wald interval for parameter `index` (0 alpha, 1 theta, 2 p).
//
// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_fit_interval(const struct ElgFit *fit,
                                uint32_t index,
                                double level,
                                double *lower,
                                double *upper);

// Likelihood-ratio test of the full model against a nested submodel.
//
// # Safety
// Pointer arguments must be NULL or valid for their stated use.
enum ElgStatus elg_lr_test(const struct ElgDataset *ds,
                           enum ElgNull null,
                           double *omega,
                           double *p_value,
                           uint32_t *df);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELG_FFI_H */

#ifndef ERASURE_OBS_H
#define ERASURE_OBS_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum EoStatus {
  EO_STATUS_OK = 0,
  EO_STATUS_NULL_POINTER = 1,
  EO_STATUS_INVALID_ARGUMENT = 2,
  EO_STATUS_DIVERGED = 3,
  EO_STATUS_NUMERICAL = 4,
  EO_STATUS_IO = 5,
  EO_STATUS_PANIC = 6,
} EoStatus;

/**
 * A system model together with its observer gain.
 */
typedef struct EoModel EoModel;

/**
 * Monte Carlo mean-square error report.
 */
typedef struct EoReport EoReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *eo_last_error(void);

/**
 * Creates a built-in model (`henon`, `linear-scalar`, `linear-diagonal`,
 * `logistic`) with its deadbeat gain.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be valid for a write.
 */
enum EoStatus eo_model_builtin(const char *name, struct EoModel **out);

/**
 * Creates a model from a JSON polynomial descriptor.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for a write.
 */
enum EoStatus eo_model_from_json(const char *json, struct EoModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from this API not yet freed.
 */
void eo_model_free(struct EoModel *model);

/**
 * State dimension N and output dimension M.
 *
 * # Safety
 * `model` must be a live handle; `state_dim`, `output_dim` valid for writes.
 */
enum EoStatus eo_model_dims(const struct EoModel *model, size_t *state_dim, size_t *output_dim);

/**
 * `out = f(x)`; both buffers hold N values.
 *
 * # Safety
 * `x` valid for N reads, `out` for N writes.
 */
enum EoStatus eo_model_step(const struct EoModel *model, const double *x, size_t n, double *out);

/**
 * Lyapunov spectrum (descending) into `exponents` (N values).
 *
 * `horizon` counts all steps including `burn_in`. `residual` may be null.
 *
 * # Safety
 * `x0` valid for N reads, `exponents` for N writes, `residual` null or
 * valid for a write.
 */
enum EoStatus eo_lyapunov_spectrum(const struct EoModel *model,
                                   const double *x0,
                                   size_t n,
                                   size_t horizon,
                                   size_t burn_in,
                                   size_t renorm_period,
                                   double *exponents,
                                   double *residual);

/**
 * Critical delivery probability of a linear system whose eigenvalue moduli
 * all exceed one. `critical_q` may be null.
 *
 * # Safety
 * `moduli` valid for `len` reads; `critical_p` valid for a write.
 */
enum EoStatus eo_linear_critical_p(const double *moduli,
                                   size_t len,
                                   size_t output_dim,
                                   double *critical_p,
                                   double *critical_q);

/**
 * Critical delivery probability from Lyapunov exponents (positive part).
 * `critical_q` may be null.
 *
 * # Safety
 * `exponents` valid for `len` reads; `critical_p` valid for a write.
 */
enum EoStatus eo_nonlinear_critical_p(const double *exponents,
                                      size_t len,
                                      size_t output_dim,
                                      double *critical_p,
                                      double *critical_q);

/**
 * Evaluates `M log(1 − p) + 2H < 0`. `lhs` may be null.
 *
 * # Safety
 * `satisfied` valid for a write; `lhs` null or valid for a write.
 */
enum EoStatus eo_entropy_condition(double p,
                                   size_t output_dim,
                                   double entropy,
                                   bool *satisfied,
                                   double *lhs);

/**
 * Runs `realizations` observer runs over `horizon` steps and stores the
 * averaged squared error in a new report.
 *
 * Results depend only on the arguments, not on thread count.
 *
 * # Safety
 * `x0`, `xhat0` valid for N reads; `out` valid for a write.
 */
enum EoStatus eo_monte_carlo(const struct EoModel *model,
                             const double *x0,
                             const double *xhat0,
                             size_t n,
                             double p,
                             size_t horizon,
                             size_t realizations,
                             double noise_amplitude,
                             uint64_t master_seed,
                             struct EoReport **out);

/**
 * Number of time points (`horizon + 1`), or 0 for null.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t eo_report_len(const struct EoReport *report);

/**
 * Copies the mean-square error series; `len` must equal [`eo_report_len`].
 *
 * # Safety
 * `out` valid for `len` writes.
 */
enum EoStatus eo_report_mean_sq_error(const struct EoReport *report, double *out, size_t len);

/**
 * Peak of the mean-square error series (`+inf` when any run diverged).
 *
 * # Safety
 * `peak` and `diverged_runs` valid for writes.
 */
enum EoStatus eo_report_summary(const struct EoReport *report, double *peak, size_t *diverged_runs);

/**
 * Releases a report; null is ignored.
 *
 * # Safety
 * `report` must be null or a handle from this API not yet freed.
 */
void eo_report_free(struct EoReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERASURE_OBS_H */

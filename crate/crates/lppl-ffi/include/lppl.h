#ifndef LPPL_H
#define LPPL_H

/* Generated by cbindgen from the lppl-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum LpplStatus {
  LPPL_STATUS_OK = 0,
  /**
   * A time at or past the critical time, or a window touching it.
   */
  LPPL_STATUS_DOMAIN = 1,
  /**
   * Invalid argument or configuration.
   */
  LPPL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The slaved linear system is degenerate at the requested point.
   */
  LPPL_STATUS_DEGENERATE = 3,
  /**
   * Calibration produced no usable fit.
   */
  LPPL_STATUS_CALIBRATION_FAILED = 4,
  LPPL_STATUS_NULL_POINTER = 5,
  LPPL_STATUS_IO = 6,
  /**
   * A panic was caught at the boundary; state is unspecified.
   */
  LPPL_STATUS_INTERNAL = 7,
} LpplStatus;

/**
 * Opaque handle over the retained fits of a calibration run.
 */
typedef struct LpplEnsemble LpplEnsemble;

/**
 * Opaque price-series handle.
 */
typedef struct LpplSeries LpplSeries;

/**
 * Calibration options. Use [`lppl_fit_options_default`] and override
 * fields as needed; `top_k`, `taboo_iterations` and `taboo_pool` of zero
 * fall back to the defaults.
 */
typedef struct LpplFitOptions {
  uint64_t seed;
  /**
   * Retained fits (0 = default 10).
   */
  size_t top_k;
  /**
   * Taboo-search iterations (0 = default 500).
   */
  size_t taboo_iterations;
  /**
   * Taboo candidate pool (0 = default 30).
   */
  size_t taboo_pool;
  /**
   * Search the exponent in [-5, 5] instead of [0.01, 0.99].
   */
  bool diagnostic_m;
} LpplFitOptions;

/**
 * The seven parameters of the log-price curve
 * `ln p(t) = A + B (tc-t)^m + C (tc-t)^m cos(omega ln(tc-t) - phi)`.
 */
typedef struct LpplCurveParams {
  double tc;
  double m;
  double omega;
  double phi;
  double a;
  double b;
  double c;
} LpplCurveParams;

/**
 * Summary statistics of a gridded density.
 */
typedef struct LpplDensitySummary {
  double mean;
  double std;
  double median;
  double q05;
  double q95;
  size_t count;
  double bandwidth;
  bool degenerate;
} LpplDensitySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lppl_version(void);

/**
 * Message of the last error on this thread. The pointer stays valid until
 * the next failing call on the same thread.
 */
const char *lppl_last_error_message(void);

/**
 * Default calibration options.
 */
struct LpplFitOptions lppl_fit_options_default(void);

/**
 * Log-price of the curve at time `t` (requires `t < tc`).
 *
 * # Safety
 * `params` and `out` must be valid, non-null pointers.
 */
enum LpplStatus lppl_log_price(const struct LpplCurveParams *params, double t, double *out);

/**
 * The non-negative-hazard margin `-B m - |C| sqrt(m^2 + omega^2)`;
 * non-negative values qualify as a bubble-consistent hazard.
 *
 * # Safety
 * `params` must be a valid, non-null pointer.
 */
double lppl_hazard_margin(const struct LpplCurveParams *params);

/**
 * Create a series from `len` uniformly spaced daily values starting at
 * `t0`. `is_log` marks the values as log-prices.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be valid.
 */
enum LpplStatus lppl_series_new(double t0,
                                const double *values,
                                size_t len,
                                bool is_log,
                                struct LpplSeries **out);

/**
 * Generate the noise-free reference curve as a log-price series.
 *
 * # Safety
 * `params` and `out` must be valid, non-null pointers.
 */
enum LpplStatus lppl_series_reference(const struct LpplCurveParams *params,
                                      size_t points,
                                      double t0,
                                      struct LpplSeries **out);

/**
 * Add i.i.d. noise to a log-price series. `student_t4` false draws
 * Gaussian noise; true draws Student-t with four degrees of freedom,
 * rescaled to the same standard deviation.
 *
 * # Safety
 * `series` and `out` must be valid, non-null pointers.
 */
enum LpplStatus lppl_series_add_noise(const struct LpplSeries *series,
                                      bool student_t4,
                                      double relative_std,
                                      uint64_t seed,
                                      struct LpplSeries **out);

/**
 * Number of observations in a series; zero for a null handle.
 *
 * # Safety
 * `series` must be null or a valid handle.
 */
size_t lppl_series_len(const struct LpplSeries *series);

/**
 * Copy the series values into `out`, which must hold at least
 * [`lppl_series_len`] doubles.
 *
 * # Safety
 * `series` must be a valid handle and `out` writable for the series length.
 */
enum LpplStatus lppl_series_values(const struct LpplSeries *series, double *out);

/**
 * Free a series handle. Null is a no-op.
 *
 * # Safety
 * `series` must be null or a pointer previously returned by this library
 * and not yet freed.
 */
void lppl_series_free(struct LpplSeries *series);

/**
 * Calibrate a series: taboo search plus damped least squares, returning the
 * retained fits sorted by objective.
 *
 * # Safety
 * `series`, `options` and `out` must be valid, non-null pointers.
 */
enum LpplStatus lppl_fit(const struct LpplSeries *series,
                         const struct LpplFitOptions *options,
                         struct LpplEnsemble **out);

/**
 * Number of retained fits; zero for a null handle.
 *
 * # Safety
 * `ensemble` must be null or a valid handle.
 */
size_t lppl_ensemble_len(const struct LpplEnsemble *ensemble);

/**
 * Parameters of the fit at `index` (0 = best).
 *
 * # Safety
 * `ensemble` and `out` must be valid, non-null pointers.
 */
enum LpplStatus lppl_ensemble_params(const struct LpplEnsemble *ensemble,
                                     size_t index,
                                     struct LpplCurveParams *out);

/**
 * Objective value of the fit at `index`.
 *
 * # Safety
 * `ensemble` and `out` must be valid, non-null pointers.
 */
enum LpplStatus lppl_ensemble_rmse(const struct LpplEnsemble *ensemble, size_t index, double *out);

/**
 * Whether the fit at `index` passes all enforced qualification criteria.
 *
 * # Safety
 * `ensemble` and `out` must be valid, non-null pointers.
 */
enum LpplStatus lppl_ensemble_qualified(const struct LpplEnsemble *ensemble,
                                        size_t index,
                                        bool *out);

/**
 * Free an ensemble handle. Null is a no-op.
 *
 * # Safety
 * `ensemble` must be null or a pointer previously returned by this library
 * and not yet freed.
 */
void lppl_ensemble_free(struct LpplEnsemble *ensemble);

/**
 * Kernel density of the retained critical times on a `points`-node grid.
 * `grid_out` and `density_out` must each hold `points` doubles; the
 * trapezoidal integral of the density over the grid is one.
 *
 * # Safety
 * All pointers must be valid; the output buffers must hold `points`
 * doubles each.
 */
enum LpplStatus lppl_tc_density(const struct LpplEnsemble *ensemble,
                                size_t points,
                                double *grid_out,
                                double *density_out,
                                struct LpplDensitySummary *summary_out);

/**
 * Kernel density of caller-provided samples; same contract as
 * [`lppl_tc_density`].
 *
 * # Safety
 * `samples` must point to `len` readable doubles; the output buffers must
 * hold `points` doubles each.
 */
enum LpplStatus lppl_sample_density(const double *samples,
                                    size_t len,
                                    size_t points,
                                    double *grid_out,
                                    double *density_out,
                                    struct LpplDensitySummary *summary_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPPL_H */

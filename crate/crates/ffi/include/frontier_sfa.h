#ifndef FRONTIER_SFA_H
#define FRONTIER_SFA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum SfaStatus {
  SFA_STATUS_OK = 0,
  SFA_STATUS_NULL_POINTER = 1,
  SFA_STATUS_INVALID_ARGUMENT = 2,
  SFA_STATUS_DATA_ERROR = 3,
  SFA_STATUS_ESTIMATION_ERROR = 4,
  SFA_STATUS_CONFIG_ERROR = 5,
  SFA_STATUS_BUFFER_TOO_SMALL = 6,
  SFA_STATUS_PANIC = 7,
} SfaStatus;

/*
 Opaque panel dataset.
 */
typedef struct SfaDataset SfaDataset;

/*
 Opaque fitted model.
 */
typedef struct SfaFit SfaFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *sfa_last_error(void);

/*
 Loads the culture, governance and GDP files.

 `standardization`: 0 pooled, 1 per year, 2 none.

 # Safety
 Paths must be null or NUL-terminated strings; `out` must be null or
 point to writable storage for one pointer.
 */
enum SfaStatus sfa_dataset_load(const char *culture,
                                const char *wgi,
                                const char *gdp,
                                int32_t standardization,
                                struct SfaDataset **out);

/*
 Simulates a single-output panel at the default truth with real-shaped
 covariates, `n_countries` countries and `n_years` consecutive years
 ending in 2019.

 # Safety
 `out` must be null or point to writable storage for one pointer.
 */
enum SfaStatus sfa_simulate(size_t n_countries,
                            size_t n_years,
                            uint64_t seed,
                            struct SfaDataset **out);

/*
 # Safety
 `dataset` must be null or a handle from this library not yet freed.
 */
void sfa_dataset_free(struct SfaDataset *dataset);

/*
 Number of countries, or 0 for a null handle.

 # Safety
 `dataset` must be null or a live handle.
 */
size_t sfa_dataset_n_countries(const struct SfaDataset *dataset);

/*
 Number of country-year observations, or 0 for a null handle.

 # Safety
 `dataset` must be null or a live handle.
 */
size_t sfa_dataset_n_observations(const struct SfaDataset *dataset);

/*
 Number of output columns, or 0 for a null handle.

 # Safety
 `dataset` must be null or a live handle.
 */
size_t sfa_dataset_n_outputs(const struct SfaDataset *dataset);

/*
 Index of the output named `name` (case-insensitive), or -1.

 # Safety
 `dataset` must be null or a live handle; `name` null or NUL-terminated.
 */
int64_t sfa_dataset_output_index(const struct SfaDataset *dataset, const char *name);

/*
 Fits one output equation by maximum likelihood.

 `spec` is one of `ti-tn`, `ti-hn`, `td-tn`, `td-hn`; `starts` 0 means
 the default number of starting points.

 # Safety
 `dataset` must be a live handle, `spec` NUL-terminated, `out` writable.
 */
enum SfaStatus sfa_fit(const struct SfaDataset *dataset,
                       size_t output,
                       const char *spec,
                       size_t starts,
                       uint64_t seed,
                       struct SfaFit **out);

/*
 # Safety
 `fit` must be null or a handle from this library not yet freed.
 */
void sfa_fit_free(struct SfaFit *fit);

/*
 Maximized log-likelihood, NaN for a null handle.

 # Safety
 `fit` must be null or a live handle.
 */
double sfa_fit_loglik(const struct SfaFit *fit);

/*
 Number of estimated parameters, 0 for a null handle.

 # Safety
 `fit` must be null or a live handle.
 */
size_t sfa_fit_n_params(const struct SfaFit *fit);

/*
 Name of parameter `index`, or null when out of range. The string lives
 as long as the handle.

 # Safety
 `fit` must be null or a live handle.
 */
const char *sfa_fit_param_name(const struct SfaFit *fit, size_t index);

/*
 Writes the estimates in original units, ordered as the parameter names.

 # Safety
 `fit` must be a live handle and `buf` writable for `len` doubles.
 */
enum SfaStatus sfa_fit_params(const struct SfaFit *fit, double *buf, size_t len);

/*
 Writes the standard errors from the inverse negative Hessian.

 # Safety
 `fit` must be a live handle and `buf` writable for `len` doubles.
 */
enum SfaStatus sfa_fit_standard_errors(const struct SfaFit *fit, double *buf, size_t len);

/*
 Writes the efficiency score `E[exp(-u) | ε]` of every country in the
 estimation sample, in dataset country order. `written` receives the
 number of countries.

 # Safety
 Handles must be live and the fit must come from `dataset`; `buf` must
 be writable for `len` doubles and `written` for one `size_t`.
 */
enum SfaStatus sfa_fit_efficiency(const struct SfaDataset *dataset,
                                  const struct SfaFit *fit,
                                  double *buf,
                                  size_t len,
                                  size_t *written);

/*
 `E[u | ε]` for a posterior `N(mu_star, sigma_star²)` truncated at zero;
 NaN for invalid input.
 */
double sfa_jlms(double mu_star, double sigma_star);

/*
 `E[exp(-weight·u) | ε]` for the same posterior; NaN for invalid input.
 */
double sfa_bc_efficiency(double mu_star, double sigma_star, double weight);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRONTIER_SFA_H */

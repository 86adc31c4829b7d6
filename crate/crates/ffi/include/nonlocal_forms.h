/* C interface of the nonlocal-forms library. */

#ifndef NONLOCAL_FORMS_H
#define NONLOCAL_FORMS_H

/* Generated by cbindgen; edit src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes of fallible calls.
 */
typedef enum NlfStatus {
  NLF_STATUS_OK = 0,
  NLF_STATUS_INVALID_ARGUMENT = 1,
  NLF_STATUS_DOMAIN_ERROR = 2,
  NLF_STATUS_NUMERICAL_ERROR = 3,
  NLF_STATUS_PANICKED = 4,
} NlfStatus;

/**
 * Opaque kernel-family handle.
 */
typedef struct NlfKernel NlfKernel;

/**
 * Opaque mollifier-family handle.
 */
typedef struct NlfMollifier NlfMollifier;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library (static storage).
 */
const char *nlf_version(void);

/**
 * Message of the last error on this thread (valid until the next failing
 * call on the same thread).
 */
const char *nlf_last_error_message(void);

/**
 * Create a mollifier family by catalog id (`power_law`, `bounded_poly`,
 * `log_annulus`, `shifted_power`, `shifted_critical`, `shifted_ratio`,
 * `profile`). Pass NaN for `beta`/`eps0` to use the defaults.
 *
 * # Safety
 * `family_id` must be a valid NUL-terminated string and `out` a valid
 * pointer.
 */
enum NlfStatus nlf_mollifier_new(const char *family_id,
                                 size_t d,
                                 double beta,
                                 double eps0,
                                 struct NlfMollifier **out);

/**
 * Evaluate `rho_eps(h)`; `h` points to `d` coordinates.
 *
 * # Safety
 * `m`, `h` (length `d`) and `out` must be valid.
 */
enum NlfStatus nlf_mollifier_eval(const struct NlfMollifier *m,
                                  double eps,
                                  const double *h,
                                  size_t d,
                                  double *out);

/**
 * Release a mollifier handle (accepts null).
 *
 * # Safety
 * `m` must come from `nlf_mollifier_new` and not be used afterwards.
 */
void nlf_mollifier_free(struct NlfMollifier *m);

/**
 * Create a kernel family by kind id (`j1`, `j2`, `j3`, `j4`, `nu`,
 * `perturbed`, `violator`); the base mollifier defaults to the power-law
 * family. Pass NaN for unused numeric parameters.
 *
 * # Safety
 * `kind` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum NlfStatus nlf_kernel_new(const char *kind,
                              size_t d,
                              double beta,
                              double lambda,
                              uint64_t seed,
                              struct NlfKernel **out);

/**
 * Evaluate `J_alpha(x, y)`; `x` and `y` point to `d` coordinates each.
 *
 * # Safety
 * `k`, `x`, `y` (length `d`) and `out` must be valid.
 */
enum NlfStatus nlf_kernel_eval(const struct NlfKernel *k,
                               double alpha,
                               const double *x,
                               const double *y,
                               size_t d,
                               double *out);

/**
 * Stored two-sided comparison constant of the kernel family.
 *
 * # Safety
 * `k` must be a valid kernel handle.
 */
double nlf_kernel_lambda(const struct NlfKernel *k);

/**
 * Release a kernel handle (accepts null).
 *
 * # Safety
 * `k` must come from `nlf_kernel_new` and not be used afterwards.
 */
void nlf_kernel_free(struct NlfKernel *k);

/**
 * Second-moment matrix sweep: writes the final `d x d` matrix row-major
 * into `out_entries` (length 4, padded with zeros for d = 1) and the
 * Cauchy-convergence flag into `out_converged`.
 *
 * # Safety
 * `k`, `x` (length `d` of the kernel), `alphas` (length `n_alphas`),
 * `out_entries` (length 4) and `out_converged` must be valid.
 */
enum NlfStatus nlf_diffusion_matrix(const struct NlfKernel *k,
                                    const double *x,
                                    double delta,
                                    const double *alphas,
                                    size_t n_alphas,
                                    double matrix_tol,
                                    double *out_entries,
                                    bool *out_converged);

/**
 * Run an experiment config (TOML file) writing artifacts into `out_dir`.
 * Returns the runner exit status: 0 pass, 1 assertion failure, 2 config
 * error, 3 numerical failure, 4 panic.
 *
 * # Safety
 * `config_path` and `out_dir` must be valid NUL-terminated strings.
 */
int32_t nlf_run_experiment(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NONLOCAL_FORMS_H */

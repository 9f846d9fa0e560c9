#ifndef GALBRUN_H
#define GALBRUN_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GalbrunStatus {
  GALBRUN_STATUS_OK = 0,
  /**
   * Null pointer, invalid UTF-8 or an out-of-range enum value.
   */
  GALBRUN_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Configuration, validation or precondition failure.
   */
  GALBRUN_STATUS_VALIDATION = 2,
  /**
   * Singular system or solver breakdown.
   */
  GALBRUN_STATUS_SOLVER_BREAKDOWN = 3,
  /**
   * Output buffer too small; the required length was still written.
   */
  GALBRUN_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * Internal panic.
   */
  GALBRUN_STATUS_INTERNAL = 5,
} GalbrunStatus;

typedef enum GalbrunModel {
  GALBRUN_MODEL_COWLING = 0,
  GALBRUN_MODEL_FULL_DIRECT = 1,
  GALBRUN_MODEL_FULL_SCHUR = 2,
} GalbrunModel;

/**
 * Opaque problem handle.
 */
typedef struct GalbrunProblem GalbrunProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses and validates `toml` (NUL-terminated UTF-8) into `*out`.
 *
 * # Safety
 * `toml` must be a valid C string and `out` a writable pointer.
 */
enum GalbrunStatus galbrun_problem_from_toml(const char *toml, struct GalbrunProblem **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `p` must come from [`galbrun_problem_from_toml`] and not be used again.
 */
void galbrun_problem_free(struct GalbrunProblem *p);

/**
 * Number of vector unknowns of the Cowling system at `level`.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum GalbrunStatus galbrun_problem_ndofs(const struct GalbrunProblem *p,
                                         uint32_t level,
                                         size_t *out);

/**
 * Sector angle `θ` over the coarsest mesh and the margin of the
 * subsonic condition `1/(1 + tan²θ) − ‖c⁻¹b‖²∞`.
 *
 * # Safety
 * `p` must be a live handle; `theta` and `margin` writable.
 */
enum GalbrunStatus galbrun_check(const struct GalbrunProblem *p, double *theta, double *margin);

/**
 * Sector angle of the numerical range of a 3×3 complex matrix given as
 * row-major real and imaginary parts.
 *
 * # Safety
 * `re` and `im` must point to 9 doubles each; `out` writable.
 */
enum GalbrunStatus galbrun_sector_angle(const double *re, const double *im, double *out);

/**
 * Solves for the configured volume force at `level`. The displacement
 * coefficients are written interleaved (`re, im, re, im, ...`) to `xi`,
 * which holds `cap` doubles; `*len` receives the number of doubles needed.
 * With `cap` too small nothing but `*len` is written.
 *
 * # Safety
 * `p` must be a live handle; `xi` must hold `cap` doubles (it may be null
 * when `cap` is 0); `len` and `residual` writable.
 */
enum GalbrunStatus galbrun_solve(const struct GalbrunProblem *p,
                                 enum GalbrunModel model,
                                 uint32_t level,
                                 double *xi,
                                 size_t cap,
                                 size_t *len,
                                 double *residual);

/**
 * Copy of the last error message of this thread, or null when the last
 * call succeeded. Release it with [`galbrun_string_free`].
 */
char *galbrun_last_error(void);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from [`galbrun_last_error`] and not be used again.
 */
void galbrun_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GALBRUN_H */

#ifndef UC2D_H
#define UC2D_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum Uc2dStatus {
  UC2D_STATUS_OK = 0,
  UC2D_STATUS_INVALID_ARGUMENT = 1,
  UC2D_STATUS_NULL_POINTER = 2,
  UC2D_STATUS_NON_ELLIPTIC = 3,
  UC2D_STATUS_SOLVER_FAILURE = 4,
  UC2D_STATUS_NO_CONVERGENCE = 5,
  UC2D_STATUS_MULTIPLIER_FAILURE = 6,
  UC2D_STATUS_BELTRAMI_FAILURE = 7,
  /**
   * An experiment ran but one of its stages failed; the report is still
   * returned.
   */
  UC2D_STATUS_STAGE_FAILED = 8,
  UC2D_STATUS_IO = 9,
  UC2D_STATUS_PANIC = 10,
} Uc2dStatus;

/**
 * A coefficient set `(A, B, C, d)`.
 */
typedef struct Uc2dCoefficients Uc2dCoefficients;

/**
 * The output of the multiplier reduction, with the coefficients it was
 * built from.
 */
typedef struct Uc2dReduction Uc2dReduction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *uc2d_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *uc2d_version(void);

/**
 * Creates a builtin coefficient set. `params_json` is a JSON object of
 * numeric parameters, or NULL for the defaults.
 *
 * # Safety
 * `name` and `params_json` (if non-null) must be NUL-terminated strings;
 * `out` must be a valid pointer.
 */
enum Uc2dStatus uc2d_coefficients_builtin(const char *name,
                                          const char *params_json,
                                          struct Uc2dCoefficients **out);

/**
 * # Safety
 * `handle` must come from [`uc2d_coefficients_builtin`] and not be freed
 * twice. NULL is ignored.
 */
void uc2d_coefficients_free(struct Uc2dCoefficients *handle);

/**
 * Builds the multipliers on the disk `B_radius((cx, cy))` at the given mesh
 * resolution with default reduction parameters.
 *
 * # Safety
 * `coeffs` must be a live handle and `out` a valid pointer.
 */
enum Uc2dStatus uc2d_reduce(const struct Uc2dCoefficients *coeffs,
                            double cx,
                            double cy,
                            double radius,
                            size_t resolution,
                            struct Uc2dReduction **out);

/**
 * Radii `R₁` (multiplier `m`) and `R₂` (multiplier `w`).
 *
 * # Safety
 * `handle` must be live; `r1`, `r2` valid pointers.
 */
enum Uc2dStatus uc2d_reduction_radii(const struct Uc2dReduction *handle, double *r1, double *r2);

/**
 * Largest relative factorization residual over `trials` seeded test pairs.
 *
 * # Safety
 * `handle` must be live; `residual` a valid pointer.
 */
enum Uc2dStatus uc2d_reduction_verify(const struct Uc2dReduction *handle,
                                      size_t trials,
                                      uint64_t seed,
                                      double *residual);

/**
 * Reduction diagnostics as a JSON string; release with [`uc2d_string_free`].
 *
 * # Safety
 * `handle` must be live; `out` a valid pointer.
 */
enum Uc2dStatus uc2d_reduction_diagnostics(const struct Uc2dReduction *handle, char **out);

/**
 * # Safety
 * `handle` must come from [`uc2d_reduce`] and not be freed twice.
 */
void uc2d_reduction_free(struct Uc2dReduction *handle);

/**
 * Complex dilatations of the row-major 2×2 matrix `a`; writes
 * `[Re μ, Im μ, Re ν, Im ν]` into `out`.
 *
 * # Safety
 * `a` must point to 4 readable doubles and `out` to 4 writable ones.
 */
enum Uc2dStatus uc2d_dilatations(const double *a, double *out);

/**
 * Runs an experiment from a JSON config and returns its `report.json`
 * content in `report` (release with [`uc2d_string_free`]). Returns
 * `StageFailed` with the report set when a stage failed.
 *
 * # Safety
 * `kind` and `config_json` must be NUL-terminated strings; `report` a valid
 * pointer.
 */
enum Uc2dStatus uc2d_run_experiment(const char *kind, const char *config_json, char **report);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void uc2d_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UC2D_H */

#ifndef DIFFEO_ENERGY_H
#define DIFFEO_ENERGY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DeStatus {
  DE_STATUS_OK = 0,
  DE_STATUS_NULL_POINTER = 1,
  /**
   * Bad sizes, non-finite input, mismatched grids or a bad configuration.
   */
  DE_STATUS_INVALID_ARGUMENT = 2,
  DE_STATUS_STENCIL = 3,
  DE_STATUS_TAIL = 4,
  DE_STATUS_NOT_DIFFEO = 5,
  DE_STATUS_WARP_TOO_LARGE = 6,
  DE_STATUS_NO_SITE = 7,
  DE_STATUS_ORDER_CONSTRAINT = 8,
  DE_STATUS_BAD_BUMP_CHOICE = 9,
  DE_STATUS_NO_ROOT = 10,
  DE_STATUS_ZERO_LENGTH = 11,
  DE_STATUS_NO_CONVERGENCE = 12,
  DE_STATUS_IO = 13,
  /**
   * A bug inside the library; the message says where.
   */
  DE_STATUS_PANIC = 14,
} DeStatus;

/**
 * One diffeomorphism `x ↦ x + u(x)`.
 */
typedef struct DeDiffeo DeDiffeo;

/**
 * A path `φ(t,x) = x + u(t,x)` on a grid.
 */
typedef struct DePath DePath;

/**
 * Measurements of one time warp.
 */
typedef struct DePerturbResult {
  double delta_e;
  double closeness;
  double predicted;
  double ratio;
  double endpoint_residual_0;
  double endpoint_residual_t;
  double theta;
} DePerturbResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code; never null, never freed. Codes
 * outside [`DeStatus`] give "unknown status".
 */
const char *de_status_string(int32_t code);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `cap` bytes, into `buf`. Returns the full message length
 * without the terminator; pass `buf = NULL` to query it.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
size_t de_last_error(char *buf, size_t cap);

/**
 * Path from `n_t·n_x` displacement samples, time-major.
 *
 * # Safety
 * `u` must be valid for `n_t·n_x` reads; `out` must be writable.
 */
enum DeStatus de_path_from_values(size_t n_t,
                                  size_t n_x,
                                  double t_max,
                                  double x_max,
                                  const double *u,
                                  struct DePath **out);

/**
 * `u = A sin(πt/T) e^{-x²}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DeStatus de_path_gaussian_bump(size_t n_t,
                                    size_t n_x,
                                    double t_max,
                                    double x_max,
                                    double amplitude,
                                    struct DePath **out);

/**
 * Seeded random path of three drifting Gaussians.
 *
 * # Safety
 * `out` must be writable.
 */
enum DeStatus de_path_random(size_t n_t,
                             size_t n_x,
                             double t_max,
                             double x_max,
                             uint64_t seed,
                             struct DePath **out);

/**
 * Frees a path; null is ignored.
 *
 * # Safety
 * `path` must come from this library and not be used afterwards.
 */
void de_path_free(struct DePath *path);

/**
 * Grid sizes of a path.
 *
 * # Safety
 * `path` must be a live handle; outputs must be writable.
 */
enum DeStatus de_path_shape(const struct DePath *path, size_t *n_t, size_t *n_x);

/**
 * `E(φ) = ∬ φ_t² φ_x dx dt`.
 *
 * # Safety
 * `path` must be a live handle; `out` must be writable.
 */
enum DeStatus de_energy(const struct DePath *path, double *out);

/**
 * `L(φ) = ∫ |φ_t|_φ dt`.
 *
 * # Safety
 * `path` must be a live handle; `out` must be writable.
 */
enum DeStatus de_length(const struct DePath *path, double *out);

/**
 * `C(φ) = ∬ φ_tx φ_xx / φ_x² dx dt`.
 *
 * # Safety
 * `path` must be a live handle; `out` must be writable.
 */
enum DeStatus de_central_defect(const struct DePath *path, double *out);

/**
 * Energy of `(φ, α)` with `α` sampled at the `n_t` time nodes.
 *
 * # Safety
 * `path` must be a live handle, `alpha` valid for `len` reads, `out` writable.
 */
enum DeStatus de_energy_virasoro(const struct DePath *path,
                                 const double *alpha,
                                 size_t len,
                                 double *out);

/**
 * Time warp of scale `ε` with orders `(k, m, n)` and exponent `a`.
 *
 * # Safety
 * `path` must be a live handle; `out` must be writable.
 */
enum DeStatus de_perturb(const struct DePath *path,
                         uint32_t k,
                         size_t m,
                         size_t n,
                         double eps,
                         uint32_t a,
                         struct DePerturbResult *out);

/**
 * Diffeomorphism from `n` displacement samples on `[-x_max, x_max]`.
 *
 * # Safety
 * `u` must be valid for `n` reads; `out` must be writable.
 */
enum DeStatus de_diffeo_from_values(double x_max, const double *u, size_t n, struct DeDiffeo **out);

/**
 * Frees a diffeomorphism; null is ignored.
 *
 * # Safety
 * `d` must come from this library and not be used afterwards.
 */
void de_diffeo_free(struct DeDiffeo *d);

/**
 * Copies the displacement samples into `buf`, which must hold exactly the
 * number of samples the diffeomorphism was built with.
 *
 * # Safety
 * `d` must be a live handle and `buf` valid for `len` writes.
 */
enum DeStatus de_diffeo_values(const struct DeDiffeo *d, double *buf, size_t len);

/**
 * `φ∘ψ`.
 *
 * # Safety
 * Inputs must be live handles; `out` must be writable.
 */
enum DeStatus de_diffeo_compose(const struct DeDiffeo *phi,
                                const struct DeDiffeo *psi,
                                struct DeDiffeo **out);

/**
 * `φ⁻¹`.
 *
 * # Safety
 * `phi` must be a live handle; `out` must be writable.
 */
enum DeStatus de_diffeo_invert(const struct DeDiffeo *phi, struct DeDiffeo **out);

/**
 * Bott cocycle `c(φ, ψ)`.
 *
 * # Safety
 * Inputs must be live handles; `out` must be writable.
 */
enum DeStatus de_bott_cocycle(const struct DeDiffeo *phi, const struct DeDiffeo *psi, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFEO_ENERGY_H */

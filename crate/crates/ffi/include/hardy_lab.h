#ifndef HARDY_LAB_H
#define HARDY_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HlRegime {
  HL_REGIME_SUBCRITICAL = 0,
  HL_REGIME_SUPERCRITICAL_GENERIC = 1,
  HL_REGIME_SUPERCRITICAL_EPSILON_CASE = 2,
} HlRegime;

typedef enum HlStatus {
  HL_STATUS_OK = 0,
  HL_STATUS_NULL_POINTER = 1,
  HL_STATUS_DOMAIN = 2,
  HL_STATUS_SUPERCRITICAL = 3,
  HL_STATUS_CONVERGENCE = 4,
  HL_STATUS_FIT = 5,
  HL_STATUS_INPUT = 6,
  HL_STATUS_SINGULAR = 7,
  HL_STATUS_POLE = 8,
  HL_STATUS_CONFIG = 9,
  HL_STATUS_IO = 10,
  HL_STATUS_BUFFER_TOO_SMALL = 11,
  HL_STATUS_PANIC = 12,
} HlStatus;

/**
 * Hemisphere profile `ω`.
 */
typedef struct HlOmega HlOmega;

/**
 * Dimension and Hardy coefficient.
 */
typedef struct HlParams HlParams;

/**
 * Weak singularity `u_{0,k}` on the model half-ball.
 */
typedef struct HlWeakRun HlWeakRun;

/**
 * Closed-form exponents. Fields undefined at or above `q_crit` are NaN.
 */
typedef struct HlConstants {
  double alpha;
  double q_crit;
  double ell;
  double kappa;
  double gamma1;
  double alpha0;
  double mu0;
  double gamma2;
  double sing_exp;
  bool subcritical;
} HlConstants;

typedef struct HlVerdict {
  enum HlRegime regime;
  double s;
  double p;
  bool point_removable;
  bool inconclusive;
  /**
   * Upper end of the ε-window, NaN outside the `q = α + 1` case.
   */
  double epsilon_upper;
} HlVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, NUL-terminated, into
 * `buf` and returns its length in bytes without the terminator. With a
 * null `buf` or a too small `len` nothing is written.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t hl_last_error(char *buf, uintptr_t len);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum HlStatus hl_params_new(uintptr_t n, double mu, struct HlParams **out);

/**
 * # Safety
 * `p` must be null or a handle from [`hl_params_new`] not yet freed.
 */
void hl_params_free(struct HlParams *p);

/**
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HlStatus hl_constants(const struct HlParams *p, double q, struct HlConstants *out);

/**
 * Solves for `ω` on a Chebyshev mesh of `m` nodes.
 *
 * # Safety
 * `p` must be a live params handle and `out` a valid handle slot.
 */
enum HlStatus hl_omega_solve(const struct HlParams *p, double q, uintptr_t m, struct HlOmega **out);

/**
 * # Safety
 * `h` must be null or a handle from [`hl_omega_solve`] not yet freed.
 */
void hl_omega_free(struct HlOmega *h);

/**
 * Number of mesh nodes, 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live omega handle.
 */
uintptr_t hl_omega_len(const struct HlOmega *h);

/**
 * # Safety
 * `h` must be a live omega handle and `out` writable.
 */
enum HlStatus hl_omega_residual(const struct HlOmega *h, double *out);

/**
 * Copies the angles and profile values into two arrays of `len` entries.
 * Either array may be null.
 *
 * # Safety
 * `h` must be a live omega handle; non-null `phi` and `omega` must point
 * to `len` writable doubles.
 */
enum HlStatus hl_omega_values(const struct HlOmega *h, double *phi, double *omega, uintptr_t len);

/**
 * Solves for the weak singularity of mass `k` on the log-uniform grid with
 * `radial × angular` nodes down to `r_min`.
 *
 * # Safety
 * `p` must be a live params handle and `out` a valid handle slot.
 */
enum HlStatus hl_weak_solve(const struct HlParams *p,
                            double q,
                            double k,
                            double r_min,
                            uintptr_t radial,
                            uintptr_t angular,
                            struct HlWeakRun **out);

/**
 * # Safety
 * `h` must be null or a handle from [`hl_weak_solve`] not yet freed.
 */
void hl_weak_free(struct HlWeakRun *h);

/**
 * Extrapolated axis ratio `u/(kK)` at the origin.
 *
 * # Safety
 * `h` must be a live weak-run handle and `out` writable.
 */
enum HlStatus hl_weak_ratio_limit(const struct HlWeakRun *h, double *out);

/**
 * # Safety
 * `h` must be a live weak-run handle and `out` writable.
 */
enum HlStatus hl_weak_residual(const struct HlWeakRun *h, double *out);

/**
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum HlStatus hl_classify(const struct HlParams *p, double q, struct HlVerdict *out);

/**
 * Runs the acceptance suite for a TOML configuration (null for the
 * defaults) and reports whether every check passed.
 *
 * # Safety
 * `config` must be null or a NUL-terminated string; `passed` writable.
 */
enum HlStatus hl_run_suite(const char *config, bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HARDY_LAB_H */

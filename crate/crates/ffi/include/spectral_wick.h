#ifndef SPECTRAL_WICK_H
#define SPECTRAL_WICK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum {
  SW_STATUS_OK = 0,
  SW_STATUS_NULL_POINTER = 1,
  SW_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Density or parameter validation failed.
   */
  SW_STATUS_VALIDATION = 3,
  /**
   * Quadrature, factorization or derivative failure.
   */
  SW_STATUS_NUMERICAL = 4,
  SW_STATUS_UNSUPPORTED = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  SW_STATUS_PANIC = 6,
} SwStatus;

/**
 * Sampling method for [`sw_sample`].
 */
typedef enum {
  SW_METHOD_CHOLESKY = 0,
  SW_METHOD_SPECTRAL = 1,
} SwMethod;

/**
 * A spectral density with its covariance kernel.
 */
typedef struct SwKernel SwKernel;

/**
 * A Gaussian bump probe bound to a kernel.
 */
typedef struct SwProbe SwProbe;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next call into the library from the same thread.
 */
const char *sw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sw_version(void);

/**
 * Builds a kernel from a density shorthand such as `"white"`,
 * `"band-limited:delta=1"` or `"fractional:H=0.7"`, with default
 * quadrature settings.
 *
 * # Safety
 * `density` must be a valid NUL-terminated string and `out_kernel` a valid pointer.
 */
SwStatus sw_kernel_new(const char *density, SwKernel **out_kernel);

/**
 * Releases a kernel. Null is ignored.
 *
 * # Safety
 * `kernel` must come from [`sw_kernel_new`] and not be used afterwards.
 */
void sw_kernel_free(SwKernel *kernel);

/**
 * `r(t) = ||T_m 1_t||^2`.
 *
 * # Safety
 * Pointers must be valid.
 */
SwStatus sw_kernel_variance(const SwKernel *kernel, double t, double *out_value);

/**
 * `K(t, s) = E[B(t) B(s)]`.
 *
 * # Safety
 * Pointers must be valid.
 */
SwStatus sw_kernel_covariance(const SwKernel *kernel, double t, double s, double *out_value);

/**
 * Gram matrix at `n` distinct times, written row-major into `out_matrix`
 * (`n * n` values). `out_jitter` receives the diagonal shift the Cholesky
 * factorization needed and may be null.
 *
 * # Safety
 * `times` must hold `n` values and `out_matrix` room for `n * n`.
 */
SwStatus sw_kernel_gram(const SwKernel *kernel,
                        const double *times,
                        size_t n,
                        double *out_matrix,
                        double *out_jitter);

/**
 * `n_draws` paths at `n_times` times, written row-major (one row per draw)
 * into `out_draws`. Identical arguments give identical output.
 *
 * # Safety
 * `times` must hold `n_times` values and `out_draws` room for
 * `n_draws * n_times`.
 */
SwStatus sw_sample(const SwKernel *kernel,
                   const double *times,
                   size_t n_times,
                   size_t n_draws,
                   uint64_t seed,
                   SwMethod method,
                   double *out_draws);

/**
 * Gaussian bump probe `exp(-(u - center)^2 / (2 width^2))`.
 *
 * # Safety
 * Pointers must be valid.
 */
SwStatus sw_probe_new(const SwKernel *kernel, double center, double width, SwProbe **out_probe);

/**
 * Releases a probe. Null is ignored.
 *
 * # Safety
 * `probe` must come from [`sw_probe_new`] and not be used afterwards.
 */
void sw_probe_free(SwProbe *probe);

/**
 * `(T_m s, T_m 1_t)` for the probe `s`.
 *
 * # Safety
 * Pointers must be valid.
 */
SwStatus sw_probe_mean(const SwProbe *probe, double t, double *out_value);

/**
 * `||T_m s||^2` for the probe `s`.
 *
 * # Safety
 * Pointers must be valid.
 */
SwStatus sw_probe_norm_sq(const SwProbe *probe, double *out_value);

/**
 * S-transform of `h~_n(<omega, 1_[a,b]>)` at the probe, which equals
 * `(T_m s, T_m 1_[a,b])^n`.
 *
 * # Safety
 * Pointers must be valid.
 */
SwStatus sw_s_wick_power(const SwProbe *probe, double a, double b, uint32_t n, double *out_value);

/**
 * Parameterized Hermite polynomial `h_n^{[t]}(x)`, `n <= 64`.
 *
 * # Safety
 * `out_value` must be valid.
 */
SwStatus sw_hermite(uint32_t n, double t, double x, double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECTRAL_WICK_H */

#ifndef SIGNBAL_H
#define SIGNBAL_H

#include <stddef.h>
#include <stdint.h>

/**
 * Status codes of the C interface.
 */
typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_DOMAIN = 2,
  SB_STATUS_CONFIG = 3,
  SB_STATUS_NUMERICAL = 4,
  SB_STATUS_REGIME = 5,
  SB_STATUS_PANIC = 6,
} SbStatus;

/**
 * A barrier function.
 */
typedef struct SbBarrier SbBarrier;

/**
 * A sampled random wave.
 */
typedef struct SbSample SbSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes, into `buf`. Returns the full message length
 * excluding the terminator; `buf` may be null to query it.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t sb_last_error_message(char *buf, size_t len);

/**
 * NUL-terminated crate version.
 */
const char *sb_version(void);

/**
 * Band kernel K_{ℓ,η}(θ) on S^d.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum SbStatus sb_kernel_band(size_t d, size_t ell, size_t eta, double theta, double *out);

/**
 * Φ(u) and τ(u) = 1 − 2Φ(u).
 *
 * # Safety
 * `cdf` and `tau_out` must be valid for one write each.
 */
enum SbStatus sb_gaussian_levels(double u, double *cdf, double *tau_out);

/**
 * Hexagonal defect D(t).
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum SbStatus sb_hex_defect(double t, size_t refinement, double *out);

/**
 * Draws a band-limited wave on S² from replicate stream `stream`.
 *
 * # Safety
 * `out` must be valid for one pointer write. The handle is released with
 * [`sb_sample_free`].
 */
enum SbStatus sb_sample_band(size_t ell,
                             size_t eta,
                             uint64_t seed,
                             uint64_t stream,
                             struct SbSample **out);

/**
 * Value of a sample at the unit vector `x` (3 doubles).
 *
 * # Safety
 * `sample` must come from [`sb_sample_band`]; `x` must hold 3 doubles and
 * `out` be valid for one write.
 */
enum SbStatus sb_sample_evaluate(const struct SbSample *sample, const double *x, double *out);

/**
 * Uncentred and centred volume bias of a sample on the cap B(x, r).
 *
 * # Safety
 * `sample` must come from [`sb_sample_band`]; `x` must hold 3 doubles;
 * the outputs must be valid for one write each.
 */
enum SbStatus sb_sample_volume_bias(const struct SbSample *sample,
                                    const double *x,
                                    double r,
                                    double u,
                                    size_t refinement,
                                    double *d_tilde,
                                    double *d_centred);

/**
 * # Safety
 * `sample` must be null or a handle from [`sb_sample_band`] not yet freed.
 */
void sb_sample_free(struct SbSample *sample);

/**
 * Three-kernel sign-barrier around the unit vector `x` on S^d; `x` holds
 * `dim` = d + 1 doubles.
 *
 * # Safety
 * `x` must hold `dim` doubles and `out` be valid for one pointer write.
 * The handle is released with [`sb_barrier_free`].
 */
enum SbStatus sb_sign_barrier(const double *x,
                              size_t dim,
                              double r,
                              size_t ell,
                              size_t eta,
                              double c,
                              struct SbBarrier **out);

/**
 * h(y) for a barrier, `y` holding d + 1 doubles.
 *
 * # Safety
 * `barrier` must come from [`sb_sign_barrier`]; `y` must hold d + 1
 * doubles and `out` be valid for one write.
 */
enum SbStatus sb_barrier_eval(const struct SbBarrier *barrier, const double *y, double *out);

/**
 * RKHS norm of a barrier.
 *
 * # Safety
 * `barrier` must come from [`sb_sign_barrier`]; `out` must be valid for
 * one write.
 */
enum SbStatus sb_barrier_rkhs_norm(const struct SbBarrier *barrier, double *out);

/**
 * Uncentred bias of a barrier at `level` on the cap of radius `r` around
 * its base point.
 *
 * # Safety
 * `barrier` must come from [`sb_sign_barrier`]; `out` must be valid for
 * one write.
 */
enum SbStatus sb_barrier_bias(const struct SbBarrier *barrier,
                              double r,
                              double level,
                              size_t refinement,
                              double *out);

/**
 * # Safety
 * `barrier` must be null or a handle from [`sb_sign_barrier`] not yet
 * freed.
 */
void sb_barrier_free(struct SbBarrier *barrier);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGNBAL_H */

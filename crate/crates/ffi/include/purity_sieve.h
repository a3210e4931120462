#ifndef PURITY_SIEVE_H
#define PURITY_SIEVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_INVALID_STATE = 3,
  PS_STATUS_DIMENSION_MISMATCH = 4,
  PS_STATUS_UNSUPPORTED_MODEL = 5,
  PS_STATUS_NUMERICAL_FAILURE = 6,
  PS_STATUS_PANIC = 7,
} PsStatus;

// Central-spin model with a maximally mixed bath.
typedef struct PsCentralSpin PsCentralSpin;

// Particle–bath parameters for the oscillator functions.
typedef struct PsQbmParams {
  double mass;
  double bath_mass;
  size_t bath_size;
  double trap_frequency;
  double bath_frequency;
} PsQbmParams;

// Gaussian moments.
typedef struct PsGaussian {
  double x_mean;
  double p_mean;
  double dx2;
  double dp2;
  double sxp;
} PsGaussian;

// Period integrals of `δp²`, `δx²` and the x–p covariance.
typedef struct PsPeriodIntegrals {
  double ip;
  double ix;
  double ixp;
} PsPeriodIntegrals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length without the NUL,
// or 0 when there is no error.
//
// # Safety
// `buf` must be valid for `len` bytes or null.
size_t ps_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ps_version(void);

// Builds the model `(ω/2)σz + Σ(ω/2)σz^i + ε σx Σσx^i`.
//
// # Safety
// `out_handle` must be a valid pointer; on success it receives a handle to be
// released with [`ps_central_spin_free`].
enum PsStatus ps_central_spin_new(size_t bath_spins,
                                  double omega,
                                  double epsilon,
                                  struct PsCentralSpin **out_handle);

// # Safety
// `handle` must come from [`ps_central_spin_new`] and not be used afterwards.
void ps_central_spin_free(struct PsCentralSpin *handle);

// Reduced-state purity and largest Schmidt probability at each time.
// `times` must start at 0 and be ascending.
//
// # Safety
// `psi` points to 4 doubles; `times`, `out_purity` and `out_pmax` to
// `n_times` doubles each.
enum PsStatus ps_central_spin_purity_series(const struct PsCentralSpin *handle,
                                            const double *psi,
                                            const double *times,
                                            size_t n_times,
                                            double *out_purity,
                                            double *out_pmax);

// Reduced-state purity at a single time, including negative times.
//
// # Safety
// `psi` points to 4 doubles and `out_purity` is valid.
enum PsStatus ps_central_spin_purity_at(const struct PsCentralSpin *handle,
                                        const double *psi,
                                        double t,
                                        double *out_purity);

// `c = 4 δE² δS²`, the curvature of purity at `t = 0` is `−c`.
//
// # Safety
// `psi` points to 4 doubles and `out_c` is valid.
enum PsStatus ps_short_time_coefficient(const struct PsCentralSpin *handle,
                                        const double *psi,
                                        double *out_c);

// Time integral of the interaction dispersion under the mean-field
// Hamiltonian over `[0, t_final]`.
//
// # Safety
// `psi` points to 4 doubles and `out_value` is valid.
enum PsStatus ps_dispersion_integral(const struct PsCentralSpin *handle,
                                     const double *psi,
                                     double t_final,
                                     double *out_value);

// # Safety
// `params` and `out_omega` must be valid pointers.
enum PsStatus ps_omega_tilde(const struct PsQbmParams *params, double *out_omega);

// Minimum-uncertainty state with `dx2 = 1/(2 M Ω̃)`.
//
// # Safety
// `out_state` must be valid.
enum PsStatus ps_qbm_pointer_state(double mass, double omega_tilde, struct PsGaussian *out_state);

// # Safety
// `state` and `out_integrals` must be valid.
enum PsStatus ps_period_integrals(const struct PsGaussian *state,
                                  double mass,
                                  double omega_tilde,
                                  struct PsPeriodIntegrals *out_integrals);

// Minimizes `a·Ip + b·Ix` over Gaussian states.
//
// # Safety
// `out_state` and `out_objective` must be valid.
enum PsStatus ps_qbm_sieve(double mass,
                           double omega_tilde,
                           double weight_p,
                           double weight_x,
                           size_t restarts,
                           uint64_t seed,
                           struct PsGaussian *out_state,
                           double *out_objective);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PURITY_SIEVE_H */

#ifndef KURAMOTO_H
#define KURAMOTO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KuramotoStatus {
  KURAMOTO_STATUS_OK = 0,
  KURAMOTO_STATUS_NULL_POINTER = 1,
  KURAMOTO_STATUS_INVALID_ARGUMENT = 2,
  KURAMOTO_STATUS_DIMENSION_MISMATCH = 3,
  KURAMOTO_STATUS_NON_FINITE = 4,
  KURAMOTO_STATUS_DIVERGED = 5,
  KURAMOTO_STATUS_UNSUPPORTED = 6,
  KURAMOTO_STATUS_PANIC = 7,
} KuramotoStatus;

/*
 Values accepted by the `scheme` argument of [`kuramoto_simulate`].
 */
typedef enum KuramotoScheme {
  KURAMOTO_SCHEME_RK4 = 0,
  KURAMOTO_SCHEME_SEMI_IMPLICIT_EULER = 1,
} KuramotoScheme;

/*
 Model parameters: masses, frictions, natural frequencies, coupling and network.
 */
typedef struct KuramotoParams KuramotoParams;

/*
 Phases and frequencies of an ensemble.
 */
typedef struct KuramotoState KuramotoState;

/*
 Sampled states of a simulation.
 */
typedef struct KuramotoTrajectory KuramotoTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *kuramoto_last_error(void);

void kuramoto_clear_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *kuramoto_version(void);

/*
 General parameters. `natural_freqs` may be NULL (all zero). `capacity` is
 a row-major `n*n` symmetric matrix, or NULL for all-to-all weights `1/n`.

 # Safety
 Non-null array pointers must reference `n` (or `n*n`) readable doubles and
 `out` must be writable.
 */
enum KuramotoStatus kuramoto_params_new(size_t n,
                                        const double *masses,
                                        const double *frictions,
                                        const double *natural_freqs,
                                        double kappa,
                                        const double *capacity,
                                        struct KuramotoParams **out);

/*
 Identical masses and frictions, zero natural frequencies, weights `1/n`.

 # Safety
 `out` must be writable.
 */
enum KuramotoStatus kuramoto_params_all_to_all(size_t n,
                                               double mass,
                                               double friction,
                                               double kappa,
                                               struct KuramotoParams **out);

/*
 Number of oscillators, or 0 for NULL.

 # Safety
 `params` must be NULL or a live handle.
 */
size_t kuramoto_params_n(const struct KuramotoParams *params);

/*
 # Safety
 `params` must be NULL or a handle not yet freed.
 */
void kuramoto_params_free(struct KuramotoParams *params);

/*
 New state from phases and frequencies. `omega` may be NULL (at rest).

 # Safety
 Non-null array pointers must reference `n` readable doubles and `out`
 must be writable.
 */
enum KuramotoStatus kuramoto_state_new(size_t n,
                                       const double *theta,
                                       const double *omega,
                                       struct KuramotoState **out);

/*
 # Safety
 `state` must be NULL or a live handle.
 */
size_t kuramoto_state_n(const struct KuramotoState *state);

/*
 Copy phases and frequencies out. Either output may be NULL to skip it.

 # Safety
 `state` must be a live handle; non-null outputs must hold `n` doubles.
 */
enum KuramotoStatus kuramoto_state_read(const struct KuramotoState *state,
                                        double *theta_out,
                                        double *omega_out);

/*
 # Safety
 `state` must be NULL or a handle not yet freed.
 */
void kuramoto_state_free(struct KuramotoState *state);

/*
 Right-hand side of the first-order system: `dθ/dt` and `dω/dt`.

 # Safety
 Handles must be live; outputs must hold `n` doubles.
 */
enum KuramotoStatus kuramoto_rhs(const struct KuramotoParams *params,
                                 const struct KuramotoState *state,
                                 double *dtheta_out,
                                 double *domega_out);

/*
 Integrate from `state` to `t_final` with step `dt`, keeping every
 `sample_every`-th state and the final one. `scheme` is a [`KuramotoScheme`].

 # Safety
 Handles must be live and `out` writable.
 */
enum KuramotoStatus kuramoto_simulate(const struct KuramotoParams *params,
                                      const struct KuramotoState *state,
                                      double dt,
                                      double t_final,
                                      size_t sample_every,
                                      uint32_t scheme,
                                      struct KuramotoTrajectory **out);

/*
 Number of stored samples, or 0 for NULL.

 # Safety
 `traj` must be NULL or a live handle.
 */
size_t kuramoto_trajectory_len(const struct KuramotoTrajectory *traj);

/*
 Time and state of sample `index`. Any output may be NULL to skip it.

 # Safety
 `traj` must be a live handle; non-null array outputs must hold `n` doubles.
 */
enum KuramotoStatus kuramoto_trajectory_sample(const struct KuramotoTrajectory *traj,
                                               size_t index,
                                               double *time_out,
                                               double *theta_out,
                                               double *omega_out);

/*
 # Safety
 `traj` must be NULL or a handle not yet freed.
 */
void kuramoto_trajectory_free(struct KuramotoTrajectory *traj);

/*
 Global order parameter `R e^{iφ}` of `n` phases.

 # Safety
 `theta` must reference `n` doubles; outputs must be writable.
 */
enum KuramotoStatus kuramoto_order_parameter(size_t n,
                                             const double *theta,
                                             double *r_out,
                                             double *phi_out);

/*
 Kinetic energy `½Σmω²` and interaction energy `(κ/2)Σa(1−cos)`.

 # Safety
 Handles must be live; outputs must be writable.
 */
enum KuramotoStatus kuramoto_energies(const struct KuramotoParams *params,
                                      const struct KuramotoState *state,
                                      double *kinetic_out,
                                      double *potential_out);

/*
 Wasserstein-2 distance between the empirical measures of two states.

 Exact when both have the same size up to the exact-solver cap, otherwise
 the sliced estimate with `seed`. `exact_out` (may be NULL) receives 1 for
 exact and 0 for sliced; `mc_error_out` (may be NULL) the Monte Carlo error.

 # Safety
 Handles must be live; non-null outputs must be writable.
 */
enum KuramotoStatus kuramoto_w2(const struct KuramotoState *a,
                                const struct KuramotoState *b,
                                uint64_t seed,
                                double *value_out,
                                int32_t *exact_out,
                                double *mc_error_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KURAMOTO_H */

#ifndef INVSOLVE_H
#define INVSOLVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum InvsolveStatus {
  INVSOLVE_STATUS_OK = 0,
  INVSOLVE_STATUS_INVALID_ARGUMENT = 1,
  INVSOLVE_STATUS_NULL_POINTER = 2,
  INVSOLVE_STATUS_NOT_SPD = 3,
  INVSOLVE_STATUS_NO_CONVERGENCE = 4,
  INVSOLVE_STATUS_IO = 5,
  INVSOLVE_STATUS_PANIC = 6,
} InvsolveStatus;

typedef enum InvsolveStart {
  INVSOLVE_START_ZERO = 0,
  /**
   * `ū = u† - 20 sin(πx1) sin(2πx2)`.
   */
  INVSOLVE_START_SOURCE = 1,
} InvsolveStart;

/**
 * Opaque problem handle.
 */
typedef struct InvsolveProblem InvsolveProblem;

/**
 * Parameters of one reconstruction run. `alpha0` and `r` are ignored by
 * the Landweber run, `step_w` by the Levenberg–Marquardt run.
 */
typedef struct InvsolveRunParams {
  double alpha0;
  double r;
  double tau;
  double delta;
  size_t max_iter;
  double step_w;
} InvsolveRunParams;

typedef struct InvsolveRunSummary {
  size_t stop_index;
  /**
   * 1 if the discrepancy principle stopped the run, 0 on the iteration cap.
   */
  int32_t discrepancy_reached;
  double final_residual;
  /**
   * `||u_N - u†||_M / ||u†||_M`.
   */
  double relative_error;
  double seconds;
} InvsolveRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *invsolve_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated and
 * NUL-terminated) and returns the full message length in bytes, excluding
 * the terminator. Returns 0 when no error has been recorded.
 *
 * # Safety
 * `buf` must be null or valid for writes of `buf_len` bytes.
 */
size_t invsolve_last_error_message(char *buf, size_t buf_len);

/**
 * Builds the problem for an `nh × nh` vertex mesh and writes the handle to
 * `out`. Free it with [`invsolve_problem_free`].
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum InvsolveStatus invsolve_problem_new(size_t nh,
                                         double beta,
                                         enum InvsolveStart start,
                                         struct InvsolveProblem **out);

/**
 * # Safety
 * `p` must be null or a handle from [`invsolve_problem_new`] not yet freed.
 */
void invsolve_problem_free(struct InvsolveProblem *p);

/**
 * Number of interior nodes, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t invsolve_problem_dim(const struct InvsolveProblem *p);

/**
 * Copies the exact source `u†` and state `y†`. Either output may be null.
 *
 * # Safety
 * Non-null outputs must be valid for `len` writes.
 */
enum InvsolveStatus invsolve_problem_truth(const struct InvsolveProblem *p,
                                           double *u_out,
                                           double *y_out,
                                           size_t len);

/**
 * Copies the starting guess chosen at construction.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum InvsolveStatus invsolve_problem_initial_guess(const struct InvsolveProblem *p,
                                                   double *out,
                                                   size_t len);

/**
 * Solves `-Δy + max(y, 0) = u` for the discrete state.
 *
 * # Safety
 * `u` must be valid for `len` reads and `y_out` for `len` writes.
 */
enum InvsolveStatus invsolve_solve_state(const struct InvsolveProblem *p,
                                         const double *u,
                                         double *y_out,
                                         size_t len);

/**
 * `L²` norm of a nodal vector, `sqrt(vᵀ M v)`.
 *
 * # Safety
 * `v` must be valid for `len` reads and `out` for one write.
 */
enum InvsolveStatus invsolve_l2_norm(const struct InvsolveProblem *p,
                                     const double *v,
                                     size_t len,
                                     double *out);

/**
 * Noisy data `y† + δ g / ||g||` with `g` standard normal drawn from `seed`.
 * The realized noise level is written to `delta_realized` when non-null.
 *
 * # Safety
 * `ydelta_out` must be valid for `len` writes; `delta_realized` null or
 * valid for one write.
 */
enum InvsolveStatus invsolve_make_noise(const struct InvsolveProblem *p,
                                        double delta,
                                        uint64_t seed,
                                        double *ydelta_out,
                                        size_t len,
                                        double *delta_realized);

/**
 * Levenberg–Marquardt reconstruction from the handle's starting guess,
 * stopped by the discrepancy principle `residual <= tau * delta`. Hitting
 * `max_iter` is not an error; check `discrepancy_reached`.
 *
 * # Safety
 * `ydelta` valid for `len` reads, `u_out` for `len` writes, `params` for
 * one read, `summary` null or valid for one write.
 */
enum InvsolveStatus invsolve_blm_run(const struct InvsolveProblem *p,
                                     const double *ydelta,
                                     size_t len,
                                     const struct InvsolveRunParams *params,
                                     double *u_out,
                                     struct InvsolveRunSummary *summary);

/**
 * Landweber reconstruction with step size `params.step_w`.
 *
 * # Safety
 * As [`invsolve_blm_run`].
 */
enum InvsolveStatus invsolve_bl_run(const struct InvsolveProblem *p,
                                    const double *ydelta,
                                    size_t len,
                                    const struct InvsolveRunParams *params,
                                    double *u_out,
                                    struct InvsolveRunSummary *summary);

/**
 * Default parameters: `alpha0 = 1`, `r = 0.5`, `tau = 1.5`, `delta = 0`,
 * `max_iter = 60`, `step_w = 720`.
 */
struct InvsolveRunParams invsolve_run_params_default(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INVSOLVE_H */

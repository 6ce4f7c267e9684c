#ifndef RODFLOW_H
#define RODFLOW_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of a call.
 */
typedef enum RodflowStatus {
  RODFLOW_STATUS_OK = 0,
  RODFLOW_STATUS_NULL_POINTER = 1,
  RODFLOW_STATUS_INVALID_ARGUMENT = 2,
  RODFLOW_STATUS_BUFFER_TOO_SMALL = 3,
  RODFLOW_STATUS_NUMERICAL = 4,
  RODFLOW_STATUS_PANIC = 5,
} RodflowStatus;

/*
 Stiffness parameters of a rod.
 */
typedef struct RodflowModel RodflowModel;

/*
 An integrated trajectory with its dense output.
 */
typedef struct RodflowTrajectory RodflowTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer stays
 valid until the next call into the library from this thread.
 */
const char *rodflow_last_error(void);

/*
 Number of state components at `level` (3, 6, 9 or 12), or 0 for an unknown level.
 */
size_t rodflow_state_dim(uint32_t level);

/*
 Creates a model with stiffnesses `k1`, `k2`, `k3`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum RodflowStatus rodflow_model_new(double k1, double k2, double k3, struct RodflowModel **out);

/*
 # Safety
 `model` must come from [`rodflow_model_new`] and not be freed twice. Null is ignored.
 */
void rodflow_model_free(struct RodflowModel *model);

/*
 Right-hand side of the hierarchy equations at `state`.

 # Safety
 `state` must point to `len` doubles and `out` to `out_len` writable doubles.
 */
enum RodflowStatus rodflow_rhs(const struct RodflowModel *model,
                               uint32_t level,
                               const double *state,
                               size_t len,
                               double *out,
                               size_t out_len);

/*
 Hamiltonian at `state`.

 # Safety
 `state` must point to `len` doubles and `out` to one writable double.
 */
enum RodflowStatus rodflow_hamiltonian(const struct RodflowModel *model,
                                       uint32_t level,
                                       const double *state,
                                       size_t len,
                                       double *out);

/*
 Casimirs at `state`; there are `level + 1` of them.

 # Safety
 `state` must point to `len` doubles, `out` to `out_len` writable doubles
 and `written`, if not null, to one writable `size_t`.
 */
enum RodflowStatus rodflow_casimirs(uint32_t level,
                                    const double *state,
                                    size_t len,
                                    double *out,
                                    size_t out_len,
                                    size_t *written);

/*
 Level-2 body state (9 doubles) to canonical coordinates
 `(theta, psi, phi, p_theta, p_psi, p_phi)` and Casimirs `(C1, C2, C3)`.

 # Safety
 `state` must point to 9 doubles, `canonical` to 6 and `casimirs` to 3 writable doubles.
 */
enum RodflowStatus rodflow_to_canonical(const double *state, double *canonical, double *casimirs);

/*
 Inverse of [`rodflow_to_canonical`].

 # Safety
 `canonical` must point to 6 doubles, `casimirs` to 3 and `state` to 9 writable doubles.
 */
enum RodflowStatus rodflow_from_canonical(const double *canonical,
                                          const double *casimirs,
                                          double *state);

/*
 Integrates from `state` over `[s0, s1]` with tolerance `tol`.

 # Safety
 `state` must point to `len` doubles and `out` to storage for one handle.
 */
enum RodflowStatus rodflow_simulate(const struct RodflowModel *model,
                                    uint32_t level,
                                    const double *state,
                                    size_t len,
                                    double s0,
                                    double s1,
                                    double tol,
                                    struct RodflowTrajectory **out);

/*
 # Safety
 `traj` must come from [`rodflow_simulate`] and not be freed twice. Null is ignored.
 */
void rodflow_trajectory_free(struct RodflowTrajectory *traj);

/*
 Number of accepted snapshots including the initial one, or 0 for null.

 # Safety
 `traj` must be null or a live handle.
 */
size_t rodflow_trajectory_len(const struct RodflowTrajectory *traj);

/*
 State dimension of the trajectory, or 0 for null.

 # Safety
 `traj` must be null or a live handle.
 */
size_t rodflow_trajectory_dim(const struct RodflowTrajectory *traj);

/*
 Arclength and state of snapshot `index`.

 # Safety
 `traj` must be a live handle, `s` one writable double and `out` `out_len` writable doubles.
 */
enum RodflowStatus rodflow_trajectory_snapshot(const struct RodflowTrajectory *traj,
                                               size_t index,
                                               double *s,
                                               double *out,
                                               size_t out_len);

/*
 State at arclength `s` from the dense output.

 # Safety
 `traj` must be a live handle and `out` point to `out_len` writable doubles.
 */
enum RodflowStatus rodflow_trajectory_interpolate(const struct RodflowTrajectory *traj,
                                                  double s,
                                                  double *out,
                                                  size_t out_len);

/*
 Largest relative drift of the Hamiltonian, Casimirs and integrals.

 # Safety
 `traj` must be a live handle and `out` one writable double.
 */
enum RodflowStatus rodflow_trajectory_max_drift(const struct RodflowTrajectory *traj, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RODFLOW_H */

#ifndef CHOQUARD_H
#define CHOQUARD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Bit set in the trigger mask of [`chq_classify`].
 */
#define CHQ_TRIGGER_SUM 1

#define CHQ_TRIGGER_P 2

#define CHQ_TRIGGER_Q 4

typedef enum ChqStatus {
  CHQ_STATUS_OK = 0,
  CHQ_STATUS_NULL_POINTER = 1,
  CHQ_STATUS_INVALID_ARGUMENT = 2,
  CHQ_STATUS_SUPERCRITICAL = 3,
  CHQ_STATUS_DIVERGED = 4,
  CHQ_STATUS_UNDETERMINED = 5,
  CHQ_STATUS_NUMERICAL = 6,
  CHQ_STATUS_BUFFER_TOO_SMALL = 7,
  CHQ_STATUS_PANIC = 8,
} ChqStatus;

/*
 Exponent tuple `(N, alpha, p, q)`.
 */
typedef struct ChqExponents ChqExponents;

/*
 Converged solution profile.
 */
typedef struct ChqProfile ChqProfile;

/*
 Assembled operators for one exponent tuple and grid.
 */
typedef struct ChqSolver ChqSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 valid until the next library call on the same thread.
 */
const char *chq_last_error_message(void);

/*
 # Safety
 `s` must come from this library and not have been freed.
 */
void chq_string_free(char *s);

/*
 Parses `alpha`, `p`, `q` from `"a/b"` or decimal strings.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum ChqStatus chq_exponents_new(uint32_t n,
                                 const char *alpha,
                                 const char *p,
                                 const char *q,
                                 struct ChqExponents **out);

/*
 # Safety
 `e` must come from [`chq_exponents_new`] and not have been freed.
 */
void chq_exponents_free(struct ChqExponents *e);

/*
 Writes whether the exponents are subcritical and the mask of fired
 thresholds (`CHQ_TRIGGER_*`).

 # Safety
 `e` must be a live handle; outputs must be writable.
 */
enum ChqStatus chq_classify(const struct ChqExponents *e, bool *subcritical, uint32_t *triggers);

/*
 Classification report as a JSON string, freed with [`chq_string_free`].

 # Safety
 `e` must be a live handle; `out` must be writable.
 */
enum ChqStatus chq_classify_json(const struct ChqExponents *e, char **out);

/*
 Builds the geometric grid and assembles the operators. Supercritical
 exponents are rejected here.

 # Safety
 `e` must be a live handle; `out` must be writable.
 */
enum ChqStatus chq_solver_new(const struct ChqExponents *e,
                              double r_min,
                              double r_max,
                              uint32_t points_per_decade,
                              struct ChqSolver **out);

/*
 # Safety
 `s` must come from [`chq_solver_new`] and not have been freed.
 */
void chq_solver_free(struct ChqSolver *s);

/*
 Empirical barrier constant `c_hat` and the threshold `khat_q` below
 which the barrier argument applies.

 # Safety
 `s` must be a live handle; outputs must be writable.
 */
enum ChqStatus chq_barrier_constant(const struct ChqSolver *s, double *c_hat, double *khat_q);

/*
 Runs the monotone iteration from `k Γ_0`. On `Ok`, `*out` receives the
 converged profile; on `Diverged` or `Undetermined` it is set to NULL.
 `iterations` may be NULL.

 # Safety
 `s` must be a live handle; `out` must be writable.
 */
enum ChqStatus chq_solve(const struct ChqSolver *s,
                         double k,
                         size_t max_iter,
                         double conv_tol,
                         struct ChqProfile **out,
                         size_t *iterations);

/*
 Number of grid nodes of the profile (0 for NULL).

 # Safety
 `p` must be NULL or a live handle.
 */
size_t chq_profile_len(const struct ChqProfile *p);

/*
 Copies radii and values into caller buffers of length `len`, which must
 be at least [`chq_profile_len`].

 # Safety
 `p` must be a live handle; `r` and `u` must hold `len` doubles.
 */
enum ChqStatus chq_profile_copy(const struct ChqProfile *p, double *r, double *u, size_t len);

/*
 # Safety
 `p` must come from [`chq_solve`] and not have been freed.
 */
void chq_profile_free(struct ChqProfile *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHOQUARD_H */

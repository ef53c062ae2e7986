#ifndef CODE_OD_H
#define CODE_OD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of a call.
 */
typedef enum CodeOdStatus {
  CODE_OD_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  CODE_OD_STATUS_NULL_ARGUMENT = 1,
  CODE_OD_STATUS_INVALID_UTF8 = 2,
  /*
   Network, path, or fixture input could not be read.
   */
  CODE_OD_STATUS_PARSE = 3,
  /*
   Inputs were read but are inconsistent (dimensions, negative counts, unknown links).
   */
  CODE_OD_STATUS_INVALID = 4,
  CODE_OD_STATUS_INFEASIBLE = 5,
  CODE_OD_STATUS_UNBOUNDED = 6,
  CODE_OD_STATUS_ITERATION_LIMIT = 7,
  /*
   A Rust panic was caught at the boundary.
   */
  CODE_OD_STATUS_PANIC = 8,
} CodeOdStatus;

/*
 Estimation method for [`code_od_estimate`].
 */
typedef enum CodeOdMethod {
  CODE_OD_METHOD_L1 = 0,
  CODE_OD_METHOD_L2 = 1,
  CODE_OD_METHOD_L1_NOISY = 2,
  CODE_OD_METHOD_L2_NOISY = 3,
  /*
   Iteratively reweighted l1 with four solves.
   */
  CODE_OD_METHOD_REWEIGHTED = 4,
} CodeOdMethod;

/*
 An estimated allocation.
 */
typedef struct CodeOdResult CodeOdResult;

/*
 A network, its path table, and a static measurement matrix.
 */
typedef struct CodeOdSystem CodeOdSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. Valid until the
 next call into this library on the same thread.
 */
const char *code_od_last_error(void);

/*
 Builds a system from a named fixture (`fig1`, `fig2`, `nguyen`).

 `links` lists the measured link ids; pass `n_links = 0` to measure every link.

 # Safety
 `name` must be a nul-terminated string, `links` must point to `n_links`
 nul-terminated strings, and `out` must be writable.
 */
enum CodeOdStatus code_od_system_from_fixture(const char *name,
                                              const char *const *links,
                                              size_t n_links,
                                              struct CodeOdSystem **out);

/*
 Builds a system from network and path-list JSON documents.

 # Safety
 As for [`code_od_system_from_fixture`].
 */
enum CodeOdStatus code_od_system_from_json(const char *network_json,
                                           const char *paths_json,
                                           const char *const *links,
                                           size_t n_links,
                                           struct CodeOdSystem **out);

/*
 # Safety
 `sys` must come from a `code_od_system_*` constructor and not be used afterwards.
 */
void code_od_system_free(struct CodeOdSystem *sys);

/*
 Number of measured links (rows). Zero for a null system.

 # Safety
 `sys` must be null or a live system.
 */
size_t code_od_system_rows(const struct CodeOdSystem *sys);

/*
 Number of paths (columns). Zero for a null system.

 # Safety
 `sys` must be null or a live system.
 */
size_t code_od_system_cols(const struct CodeOdSystem *sys);

/*
 Copies the 0/1 measurement matrix in row-major order into `buf`, which
 must hold `rows * cols` entries.

 # Safety
 `sys` must be live and `buf` must be writable for `len` doubles.
 */
enum CodeOdStatus code_od_system_matrix(const struct CodeOdSystem *sys, double *buf, size_t len);

/*
 Counts `A x` for an allocation `x` of length `cols`, written to `y` of length `rows`.

 # Safety
 `x` must be readable for `nx` doubles and `y` writable for `ny` doubles.
 */
enum CodeOdStatus code_od_system_apply(const struct CodeOdSystem *sys,
                                       const double *x,
                                       size_t nx,
                                       double *y,
                                       size_t ny);

/*
 Estimates path flows from counts `y` (length `rows`).

 `delta` is the noise radius for the noisy methods and is ignored otherwise.

 # Safety
 `sys` must be live, `y` readable for `ny` doubles, and `out` writable.
 */
enum CodeOdStatus code_od_estimate(const struct CodeOdSystem *sys,
                                   enum CodeOdMethod method,
                                   const double *y,
                                   size_t ny,
                                   double delta,
                                   struct CodeOdResult **out);

/*
 Weighted l1 estimate with one positive weight per path.

 # Safety
 As for [`code_od_estimate`]; `weights` must be readable for `nw` doubles.
 */
enum CodeOdStatus code_od_estimate_weighted(const struct CodeOdSystem *sys,
                                            const double *y,
                                            size_t ny,
                                            const double *weights,
                                            size_t nw,
                                            struct CodeOdResult **out);

/*
 # Safety
 `res` must come from an estimate call and not be used afterwards.
 */
void code_od_result_free(struct CodeOdResult *res);

/*
 Length of the allocation vector. Zero for a null result.

 # Safety
 `res` must be null or live.
 */
size_t code_od_result_len(const struct CodeOdResult *res);

/*
 Copies the allocation into `buf` of length `len` (must equal the result length).

 # Safety
 `res` must be live and `buf` writable for `len` doubles.
 */
enum CodeOdStatus code_od_result_x(const struct CodeOdResult *res, double *buf, size_t len);

/*
 Objective value of the final solve. NaN for a null result.

 # Safety
 `res` must be null or live.
 */
double code_od_result_objective(const struct CodeOdResult *res);

/*
 Number of nonzero path flows.

 # Safety
 `res` must be null or live.
 */
size_t code_od_result_sparsity(const struct CodeOdResult *res);

/*
 The full result as JSON, including OD flows and splits. Free with
 [`code_od_string_free`]. Null on failure.

 # Safety
 `res` must be null or live.
 */
char *code_od_result_json(const struct CodeOdResult *res);

/*
 # Safety
 `s` must come from this library and not be used afterwards.
 */
void code_od_string_free(char *s);

/*
 Bounds on total path length `v^T x` over all allocations consistent with `y`.

 `lengths` has one entry per path; pass `nl = 0` for unit lengths (vehicle
 counts). When the maximum is unbounded, `*upper` is set to infinity and
 [`CodeOdStatus::Unbounded`] is returned; `*lower` is still valid.

 # Safety
 `sys` must be live, `y` and `lengths` readable, `lower` and `upper` writable.
 */
enum CodeOdStatus code_od_vmt_bounds(const struct CodeOdSystem *sys,
                                     const double *y,
                                     size_t ny,
                                     const double *lengths,
                                     size_t nl,
                                     double *lower,
                                     double *upper);

/*
 Number of links in the network behind `sys`.

 # Safety
 `sys` must be null or live.
 */
size_t code_od_system_links(const struct CodeOdSystem *sys);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODE_OD_H */

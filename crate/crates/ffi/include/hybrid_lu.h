#ifndef HYBRID_LU_H
#define HYBRID_LU_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum HluStatus {
  HLU_STATUS_OK = 0,
  HLU_STATUS_NULL_POINTER = 1,
  /**
   * Empty, non-square, malformed or out-of-range matrix input.
   */
  HLU_STATUS_INVALID_MATRIX = 2,
  /**
   * No perfect matching, or a structurally zero diagonal.
   */
  HLU_STATUS_STRUCTURALLY_SINGULAR = 3,
  /**
   * Zero pivot with perturbation disabled.
   */
  HLU_STATUS_NUMERIC_BREAKDOWN = 4,
  /**
   * New values do not fit the analyzed pattern.
   */
  HLU_STATUS_PATTERN_MISMATCH = 5,
  HLU_STATUS_DIMENSION_MISMATCH = 6,
  HLU_STATUS_INVALID_CONFIG = 7,
  HLU_STATUS_IO = 8,
  HLU_STATUS_INTERNAL = 9,
} HluStatus;

/**
 * A factorized matrix ready to solve. Created by `hlu_solver_create` or
 * `hlu_solver_load`, released by `hlu_solver_free`.
 */
typedef struct HluSolver HluSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Analyzes and factorizes the `n x n` CSR matrix. `row_ptr` holds `n + 1`
 * offsets; `col_idx` and `values` hold `row_ptr[n]` entries with strictly
 * ascending columns per row. `threads` of 0 is treated as 1.
 *
 * # Safety
 * The arrays must be valid for the lengths above and `out` valid for one
 * write. On failure `*out` is left untouched.
 */
enum HluStatus hlu_solver_create(size_t n,
                                 const size_t *row_ptr,
                                 const size_t *col_idx,
                                 const double *values,
                                 size_t threads,
                                 struct HluSolver **out);

/**
 * Like `hlu_solver_create` with the matrix read from a Matrix Market file.
 *
 * # Safety
 * `path` is a NUL-terminated UTF-8 string; `out` is valid for one write.
 */
enum HluStatus hlu_solver_load(const char *path, size_t threads, struct HluSolver **out);

/**
 * Refactorizes with new values on the same pattern, reusing the analysis
 * and the prior pivot order.
 *
 * # Safety
 * `solver` is a live handle; `values` holds `hlu_solver_nnz(solver)`
 * entries.
 */
enum HluStatus hlu_solver_refactorize(struct HluSolver *solver, const double *values);

/**
 * Solves `A x = b`, refining automatically when a pivot was perturbed.
 *
 * # Safety
 * `solver` is a live handle; `b` and `x` hold `hlu_solver_n(solver)`
 * entries and may not overlap.
 */
enum HluStatus hlu_solver_solve(struct HluSolver *solver, const double *b, double *x);

/**
 * Dimension of the factorized matrix, or 0 for a null handle.
 *
 * # Safety
 * `solver` is null or a live handle.
 */
size_t hlu_solver_n(const struct HluSolver *solver);

/**
 * Stored entries of the factorized matrix, or 0 for a null handle.
 *
 * # Safety
 * `solver` is null or a live handle.
 */
size_t hlu_solver_nnz(const struct HluSolver *solver);

/**
 * Pivots perturbed by the latest factorization.
 *
 * # Safety
 * `solver` is null or a live handle.
 */
size_t hlu_solver_perturbation_count(const struct HluSolver *solver);

/**
 * Backward error and refinement steps of the latest solve. Either output
 * may be null.
 *
 * # Safety
 * `solver` is a live handle; non-null outputs are valid for one write.
 */
enum HluStatus hlu_solver_last_solve_info(const struct HluSolver *solver,
                                          double *backward_error,
                                          size_t *refinement_iterations);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `solver` is null or a live handle, which must not be used afterwards.
 */
void hlu_solver_free(struct HluSolver *solver);

/**
 * Message for the most recent failure on the calling thread, or null if
 * none. Valid until the next failing call on the same thread.
 */
const char *hlu_last_error(void);

/**
 * Static name of a status code.
 */
const char *hlu_status_name(enum HluStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRID_LU_H */

/* C interface of the free boundary laboratory. */

#ifndef FBTOUCH_H
#define FBTOUCH_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by the C entry points.
 */
typedef enum FbtStatus {
  FBT_OK = 0,
  FBT_ERR_INVALID_ARGUMENT = 1,
  FBT_ERR_IO = 2,
  FBT_ERR_NOT_CONVERGED = 3,
  FBT_ERR_VERIFICATION = 4,
  FBT_ERR_NULL_POINTER = 5,
  FBT_ERR_UTF8 = 6,
  FBT_ERR_PANIC = 7,
} FbtStatus;

/**
 * Opaque scalar field handle.
 */
typedef struct FbtField FbtField;

/**
 * Opaque solve report handle.
 */
typedef struct FbtReport FbtReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static C string.
 */
const char *fbt_version(void);

/**
 * Copy the last error message for the calling thread into `buf`
 * (truncated, always NUL-terminated). Returns the full message length.
 *
 * # Safety
 * `buf` must point to `len` writable bytes (or be null to query the length).
 */
size_t fbt_last_error(char *buf, size_t len);

/**
 * Load a field file; null on failure (see fbt_last_error).
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
struct FbtField *fbt_field_load(const char *path);

/**
 * Sample a catalog member onto a fresh grid.
 * `kind`: 0 half-space polynomial, 1 one-sided positive, 2 one-sided
 * negative, 3 two-sided. `domain`: 0 half ball, 1 full ball, 2 half rect.
 */
struct FbtField *fbt_field_sample_catalog(int32_t kind,
                                          double a,
                                          double alpha,
                                          double b,
                                          double rotation,
                                          uint32_t subdiv,
                                          int32_t domain);

/**
 * Write the field file format.
 *
 * # Safety
 * `field` must be a live handle, `path` a NUL-terminated UTF-8 string.
 */
enum FbtStatus fbt_field_save(const struct FbtField *field, const char *path);

/**
 * Grid metadata: dimension, spacing and active node count.
 *
 * # Safety
 * `field` must be a live handle; out pointers may be null to skip.
 */
enum FbtStatus fbt_field_info(const struct FbtField *field,
                              uint32_t *n_out,
                              double *h_out,
                              uint64_t *active_out);

/**
 * Value at the active node nearest to (x, y).
 *
 * # Safety
 * `field` must be a live handle and `value_out` writable.
 */
enum FbtStatus fbt_field_value_at(const struct FbtField *field,
                                  double x,
                                  double y,
                                  double *value_out);

/**
 * # Safety
 * `field` must come from this library and not be freed twice.
 */
void fbt_field_free(struct FbtField *field);

/**
 * Solve from a flat `key = value` config given as text (same keys as the
 * CLI solve subcommand). Null on config errors; inspect fbt_last_error.
 *
 * # Safety
 * `config_text` must be a NUL-terminated UTF-8 string.
 */
struct FbtReport *fbt_solve_config(const char *config_text);

/**
 * # Safety
 * `report` must be a live handle.
 */
int32_t fbt_report_converged(const struct FbtReport *report);

/**
 * # Safety
 * `report` must be a live handle.
 */
int64_t fbt_report_outer_iters(const struct FbtReport *report);

/**
 * # Safety
 * `report` must be a live handle.
 */
double fbt_report_final_residual(const struct FbtReport *report);

/**
 * Clone the solved field out of a report.
 *
 * # Safety
 * `report` must be a live handle.
 */
struct FbtField *fbt_report_field(const struct FbtReport *report);

/**
 * Verify class membership of the solved field: trace, sup bound and
 * distributional residual (plus origin contact when `require_origin`).
 * Returns FbtOk when every item passes, FbtErrVerification otherwise.
 *
 * # Safety
 * `report` must be a live handle.
 */
enum FbtStatus fbt_report_verify(const struct FbtReport *report, double m, int32_t require_origin);

/**
 * # Safety
 * `report` must come from this library and not be freed twice.
 */
void fbt_report_free(struct FbtReport *report);

/**
 * Best-fit classification of a field against the global-solution catalog.
 * Outputs: kind code (as in fbt_field_sample_catalog), parameters and the
 * RMS misfit.
 *
 * # Safety
 * `field` must be a live handle; out pointers may be null to skip.
 */
enum FbtStatus fbt_classify(const struct FbtField *field,
                            int32_t *kind_out,
                            double *a_out,
                            double *alpha_out,
                            double *b_out,
                            double *residual_out);

/**
 * Coincidence-boundary points of a thresholded field. Two-call pattern:
 * pass a null buffer to query the count, then a buffer of `2 * count`
 * doubles (x then y per point).
 *
 * # Safety
 * `field` must be a live handle; `count_inout` must be writable; `buf`, if
 * non-null, must hold `2 * *count_inout` doubles.
 */
enum FbtStatus fbt_contact_free_boundary(const struct FbtField *field,
                                         double eps_g,
                                         double *buf,
                                         uint64_t *count_inout);

/**
 * Monotonicity scan of the product functional for the tangential split of
 * a half-ball field: fills `phi_out[i]` for each radius and reports whether
 * the scan is monotone (within the default slack) through `monotone_out`.
 *
 * # Safety
 * `field` must be a live handle; `radii` must hold `radii_len` doubles and
 * `phi_out` as many writable slots.
 */
enum FbtStatus fbt_phi_scan(const struct FbtField *field,
                            const double *radii,
                            uint64_t radii_len,
                            double *phi_out,
                            int32_t *monotone_out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FBTOUCH_H */

#ifndef SHADOWSPEC_H
#define SHADOWSPEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The numeric values of the first four match the exit codes
 * of the command-line tool.
 */
typedef enum ShadowspecStatus {
  SHADOWSPEC_STATUS_OK = 0,
  SHADOWSPEC_STATUS_INPUT_ERROR = 2,
  SHADOWSPEC_STATUS_NUMERICAL_FAILURE = 3,
  SHADOWSPEC_STATUS_CERTIFICATE_FAILURE = 4,
  SHADOWSPEC_STATUS_NULL_POINTER = 10,
  SHADOWSPEC_STATUS_BUFFER_TOO_SMALL = 11,
  SHADOWSPEC_STATUS_PANIC = 12,
} ShadowspecStatus;

/**
 * Opaque operator handle.
 */
typedef struct ShadowspecOperator ShadowspecOperator;

typedef struct ShadowspecVerdicts {
  bool hyperbolic;
  bool uniformly_expansive;
  bool shadowing;
  /**
   * Distance of the spectrum to the unit circle.
   */
  double gap_sigma;
} ShadowspecVerdicts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. The pointer stays valid
 * until the next library call on the same thread.
 */
const char *shadowspec_last_error(void);

/**
 * Parses an operator from JSON.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum ShadowspecStatus shadowspec_operator_from_json(const char *json,
                                                    struct ShadowspecOperator **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `op` must come from `shadowspec_operator_from_json` and not be used again.
 */
void shadowspec_operator_free(struct ShadowspecOperator *op);

/**
 * Dimension of a dense operator, or 0 for a shift.
 *
 * # Safety
 * `op` must be a live handle and `out_dim` a valid pointer.
 */
enum ShadowspecStatus shadowspec_operator_dim(const struct ShadowspecOperator *op, size_t *out_dim);

/**
 * Hyperbolicity, uniform expansivity and shadowing verdicts.
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum ShadowspecStatus shadowspec_classify(const struct ShadowspecOperator *op,
                                          double tol,
                                          struct ShadowspecVerdicts *out);

/**
 * Full analysis report as JSON, as written by `shadowspec analyze`.
 *
 * # Safety
 * `op` must be a live handle and `out_json` a valid pointer. The string
 * must be released with `shadowspec_string_free`.
 */
enum ShadowspecStatus shadowspec_analyze_json(const struct ShadowspecOperator *op,
                                              double tol,
                                              uint64_t seed,
                                              char **out_json);

/**
 * Shadowing experiment on `-window..=window` as JSON, as written by
 * `shadowspec shadow`.
 *
 * # Safety
 * `op` must be a live handle and `out_json` a valid pointer. The string
 * must be released with `shadowspec_string_free`.
 */
enum ShadowspecStatus shadowspec_shadow_json(const struct ShadowspecOperator *op,
                                             double delta,
                                             size_t window,
                                             uint64_t seed,
                                             char **out_json);

/**
 * Riesz projector of a dense operator on the circle of radius 1 with
 * `nodes` quadrature nodes, written row-major as interleaved
 * `(re, im)` pairs. `out_len` must be at least `2 * dim * dim`.
 *
 * # Safety
 * `op` must be a live handle and `out` must point to `out_len` doubles.
 */
enum ShadowspecStatus shadowspec_riesz_projector(const struct ShadowspecOperator *op,
                                                 size_t nodes,
                                                 double *out,
                                                 size_t out_len);

/**
 * Test-sequence gain at ratio `q > 1`. `x` holds interleaved `(re, im)`
 * pairs: `dim` of them for a dense operator, or the coordinates
 * `-m..=m` of a shift state (`x_len = 2 * (2m + 1)`).
 *
 * # Safety
 * `op` must be a live handle, `x` must point to `x_len` doubles and the
 * outputs must be valid pointers.
 */
enum ShadowspecStatus shadowspec_bgain(const struct ShadowspecOperator *op,
                                       const double *x,
                                       size_t x_len,
                                       double q,
                                       double *gain_measured,
                                       double *gain_identity);

/**
 * Releases a string returned by the library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used again.
 */
void shadowspec_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SHADOWSPEC_H */

#ifndef HYPDICH_H
#define HYPDICH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. The numeric values of the nonzero codes match the exit codes
// of the command-line tool where both exist.
typedef enum HdStatus {
  HD_STATUS_OK = 0,
  HD_STATUS_INVALID_ARGUMENT = 1,
  HD_STATUS_INVALID_INPUT = 2,
  HD_STATUS_NUMERICAL = 3,
  HD_STATUS_NULL_POINTER = 4,
  HD_STATUS_INVALID_UTF8 = 5,
  HD_STATUS_PANIC = 6,
} HdStatus;

// Parsed expression in `x` and `t`.
typedef struct HdExpr HdExpr;

// Validated system.
typedef struct HdSystem HdSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into this library on the same thread.
const char *hd_last_error(void);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void hd_string_free(char *s);

// Parses and validates a system document.
//
// # Safety
// `json` must be a nul-terminated string and `out` a writable pointer.
enum HdStatus hd_system_from_json(const char *json, struct HdSystem **out);

// # Safety
// `sys` must be null or a handle from [`hd_system_from_json`] not yet freed.
void hd_system_free(struct HdSystem *sys);

// # Safety
// `sys` must be a live handle and `out` writable.
enum HdStatus hd_system_dimension(const struct HdSystem *sys, size_t *out);

// Sampled coefficient bounds as JSON.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum HdStatus hd_extrema_json(const struct HdSystem *sys, size_t n_x, size_t n_t, char **out);

// Per-component damping conditions and the contraction bound as JSON.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum HdStatus hd_check_th3_json(const struct HdSystem *sys, char **out);

// Damping threshold of one constant-coefficient component.
//
// # Safety
// `out` must be writable.
enum HdStatus hd_remark_threshold(double a, double b, double *out);

// Propagates `u_in` from time `s` to time `t`. Both buffers hold
// `n * n_points` values, component-major, on the nodes `i / n_points`.
//
// # Safety
// `sys` must be a live handle; `u_in` readable and `u_out` writable for `len`
// values. The buffers may not overlap.
enum HdStatus hd_evolve(const struct HdSystem *sys,
                        size_t n_points,
                        double dt,
                        double t,
                        double s,
                        const double *u_in,
                        double *u_out,
                        size_t len);

// Dichotomy detection report as JSON.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum HdStatus hd_dichotomy_json(const struct HdSystem *sys,
                                size_t n_points,
                                bool refine,
                                bool skip_svd,
                                char **out);

// Reduces a second-order document and returns the first-order system document.
//
// # Safety
// `json` must be a nul-terminated string and `out` writable.
enum HdStatus hd_reduce_json(const char *json, char **out);

// # Safety
// `src` must be a nul-terminated string and `out` writable.
enum HdStatus hd_expr_parse(const char *src, struct HdExpr **out);

// # Safety
// `e` must be a live handle and `out` writable.
enum HdStatus hd_expr_eval(const struct HdExpr *e, double x, double t, double *out);

// Canonical text of the expression.
//
// # Safety
// `e` must be a live handle and `out` writable.
enum HdStatus hd_expr_to_string(const struct HdExpr *e, char **out);

// # Safety
// `e` must be null or a handle from [`hd_expr_parse`] not yet freed.
void hd_expr_free(struct HdExpr *e);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPDICH_H */

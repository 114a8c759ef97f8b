#ifndef XMO_H
#define XMO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result of every fallible call.
 */
typedef enum XmoStatus {
  XMO_STATUS_OK = 0,
  XMO_STATUS_NULL_POINTER = 1,
  XMO_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed expression or unknown identifier.
   */
  XMO_STATUS_PARSE = 3,
  /*
   A documented precondition was violated.
   */
  XMO_STATUS_PRECONDITION = 4,
  /*
   A function was evaluated outside its domain.
   */
  XMO_STATUS_DOMAIN = 5,
  /*
   A scanned condition was not met (threshold selection).
   */
  XMO_STATUS_CONDITION_NOT_MET = 6,
  XMO_STATUS_IO = 7,
  /*
   A Rust panic was caught at the boundary.
   */
  XMO_STATUS_PANIC = 8,
} XmoStatus;

/*
 Result of the end-to-end dyadic approximation pipeline.
 */
typedef struct XmoApproximation XmoApproximation;

/*
 A real function of `x1..xn`.
 */
typedef struct XmoFunction XmoFunction;

/*
 A bilinear kernel, possibly truncated.
 */
typedef struct XmoKernel XmoKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *xmo_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *xmo_version(void);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be NULL or a pointer returned by a `*_json` function that has
 not been freed.
 */
void xmo_string_free(char *s);

/*
 Parses a catalog name (`smoothed_log`, `log_abs`, `sin_product`, `bump`)
 or an expression in `x1..xn`.

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum XmoStatus xmo_function_parse(const char *text, uintptr_t dim, struct XmoFunction **out);

/*
 # Safety
 `f` must be NULL or a handle from [`xmo_function_parse`] not yet freed.
 */
void xmo_function_free(struct XmoFunction *f);

/*
 Number of coordinates the function reads.

 # Safety
 `f` must be a live handle.
 */
uintptr_t xmo_function_dim(const struct XmoFunction *f);

/*
 # Safety
 `f` must be a live handle, `x` must hold `len` doubles and `out` must be
 writable.
 */
enum XmoStatus xmo_function_eval(const struct XmoFunction *f,
                                 const double *x,
                                 uintptr_t len,
                                 double *out);

/*
 Average of `f` over the cube of the given centre and half-side.

 # Safety
 `f` must be a live handle, `center` must hold `dim` doubles and `out`
 must be writable.
 */
enum XmoStatus xmo_cube_average(const struct XmoFunction *f,
                                const double *center,
                                uintptr_t dim,
                                double half_side,
                                uintptr_t resolution,
                                double *out);

/*
 Mean oscillation of `f` over the cube of the given centre and half-side.

 # Safety
 As for [`xmo_cube_average`].
 */
enum XmoStatus xmo_mean_oscillation(const struct XmoFunction *f,
                                    const double *center,
                                    uintptr_t dim,
                                    double half_side,
                                    uintptr_t resolution,
                                    double *out);

/*
 The smooth reference kernel in dimension `dim` (1 to 3).

 # Safety
 `out` must be writable.
 */
enum XmoStatus xmo_kernel_reference(uintptr_t dim, struct XmoKernel **out);

/*
 The singular odd kernel in dimension `dim` (1 to 3).

 # Safety
 `out` must be writable.
 */
enum XmoStatus xmo_kernel_riesz(uintptr_t dim, struct XmoKernel **out);

/*
 A new handle for the truncation of `k` at `eta`; `k` is left unchanged.

 # Safety
 `k` must be a live handle and `out` must be writable.
 */
enum XmoStatus xmo_kernel_truncate(const struct XmoKernel *k, double eta, struct XmoKernel **out);

/*
 `K(x, y, z)`; each point holds `dim` doubles.

 # Safety
 `k` must be a live handle, `x`, `y`, `z` must each hold `dim` doubles
 and `out` must be writable.
 */
enum XmoStatus xmo_kernel_eval(const struct XmoKernel *k,
                               const double *x,
                               const double *y,
                               const double *z,
                               uintptr_t dim,
                               double *out);

/*
 # Safety
 `k` must be NULL or a live handle.
 */
void xmo_kernel_free(struct XmoKernel *k);

/*
 Evaluates `[b, T]_slot(f, g)` at `npoints` points stored row-major in
 `xs` (`npoints * dim` doubles) and writes `npoints` values to `out`.
 Supports are cubes given by centre and half-side.

 # Safety
 All handles must be live; `f_center` and `g_center` must hold `dim`
 doubles; `xs` must hold `npoints * dim` doubles; `out` must hold
 `npoints` writable doubles.
 */
enum XmoStatus xmo_commutator(int slot,
                              const struct XmoFunction *b,
                              const struct XmoKernel *k,
                              const struct XmoFunction *f,
                              const double *f_center,
                              double f_half_side,
                              const struct XmoFunction *g,
                              const double *g_center,
                              double g_half_side,
                              const double *xs,
                              uintptr_t npoints,
                              uintptr_t dim,
                              uintptr_t resolution,
                              double *out);

/*
 Vector `A_p` constant of `(w1, w2)` with exponents `p1, p2`, scanned
 over cubes inside `[-extent, extent]^n`.

 # Safety
 `w1` and `w2` must be live handles and `out` must be writable.
 */
enum XmoStatus xmo_vector_ap_constant(const struct XmoFunction *w1,
                                      const struct XmoFunction *w2,
                                      double p1,
                                      double p2,
                                      double extent,
                                      uintptr_t resolution,
                                      double *out);

/*
 Runs the approximation pipeline for `f` with default settings.

 # Safety
 `f` must be a live handle and `out` must be writable.
 */
enum XmoStatus xmo_approx_run(const struct XmoFunction *f,
                              double epsilon,
                              uintptr_t k_max,
                              struct XmoApproximation **out);

/*
 Measured BMO distance between `f` and its piecewise-constant approximant.

 # Safety
 `a` must be a live handle and `out` must be writable.
 */
enum XmoStatus xmo_approx_error(const struct XmoApproximation *a, double *out);

/*
 Value of the piecewise-constant approximant at `x`.

 # Safety
 `a` must be a live handle, `x` must hold `dim` doubles and `out` must be
 writable.
 */
enum XmoStatus xmo_approx_eval(const struct XmoApproximation *a,
                               const double *x,
                               uintptr_t dim,
                               double *out);

/*
 Full pipeline report as JSON; free with [`xmo_string_free`].

 # Safety
 `a` must be a live handle and `out` must be writable.
 */
enum XmoStatus xmo_approx_report_json(const struct XmoApproximation *a, char **out);

/*
 # Safety
 `a` must be NULL or a live handle.
 */
void xmo_approx_free(struct XmoApproximation *a);

/*
 Runs the `xmo` command line in-process and returns its exit status.

 # Safety
 `argv` must hold `argc` NUL-terminated strings, the first being the
 program name.
 */
int xmo_cli_run(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XMO_H */

/* C interface to the kfree library. Generated by cbindgen from src/lib.rs; do not edit. */

#ifndef KFREE_H
#define KFREE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code for every fallible call. `Ok` is zero; everything else
 * leaves out-parameters untouched (except where documented) and stores a
 * human-readable message retrievable via `kfree_last_error`.
 */
typedef enum KfreeStatus {
  /**
   * Success.
   */
  KfreeStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  KfreeStatus_NullPointer = 1,
  /**
   * Arguments outside the mathematical domain (k < 2, n = 0, empty tuple, ...).
   */
  KfreeStatus_Domain = 2,
  /**
   * The request exceeds a hard memory/size budget.
   */
  KfreeStatus_Capacity = 3,
  /**
   * The request exceeds the internal work budget.
   */
  KfreeStatus_Budget = 4,
  /**
   * The requested tolerance cannot be certified.
   */
  KfreeStatus_Precision = 5,
  /**
   * Operating-system I/O failure.
   */
  KfreeStatus_Io = 6,
} KfreeStatus;

/**
 * Opaque handle to a sieved window of k-free indicator bits.
 */
typedef struct KfreeWindow KfreeWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static NUL-terminated string. Never null; do not free.
 */
const char *kfree_version(void);

/**
 * Short static name for a status code ("ok", "domain", ...). Never null; do
 * not free.
 */
const char *kfree_status_name(enum KfreeStatus status);

/**
 * Message describing the most recent failure on the calling thread, or an
 * empty string if none. The pointer stays valid until the next failing call
 * on the same thread; do not free.
 */
const char *kfree_last_error(void);

/**
 * Writes 1 to `*out` when n has no k-th power divisor > 1, else 0.
 * Requires n >= 1 and k >= 2.
 *
 * # Safety
 * `out` must be null or valid for a `bool` write.
 */
enum KfreeStatus kfree_is_kfree(uint64_t n, uint32_t k, bool *out);

/**
 * Writes #{1 <= n <= limit : n is k-free} to `*out`. Runs in O(limit^{1/k});
 * limits with limit^{1/k} > 2^27 are rejected with `Capacity`.
 *
 * # Safety
 * `out` must be null or valid for a `u64` write.
 */
enum KfreeStatus kfree_count_upto(uint32_t k, uint64_t limit, uint64_t *out);

/**
 * Writes the asymptotic density of k-free numbers, 1/zeta(k), to `*value`,
 * with a certified error bound <= tol in `*err`.
 *
 * # Safety
 * `value` and `err` must each be null or valid for an `f64` write.
 */
enum KfreeStatus kfree_zeta_inverse(uint32_t k, double tol, double *value, double *err);

/**
 * Writes the singular-series density for the shift tuple
 * (shifts[0], ..., shifts[num_shifts-1]) over the progression modulus q:
 * the limiting proportion, within one residue class mod q, of n for which
 * n + shift is k-free simultaneously for every shift. `*err` receives a
 * certified error bound <= tol.
 *
 * # Safety
 * `shifts` must be null or valid for reading `num_shifts` i64 values;
 * `value` and `err` must each be null or valid for an `f64` write.
 */
enum KfreeStatus kfree_singular_series(uint64_t q,
                                       uint32_t k,
                                       const int64_t *shifts,
                                       uintptr_t num_shifts,
                                       double tol,
                                       double *value,
                                       double *err);

/**
 * Sieves the k-free indicator over [lo, hi) and writes a heap-allocated
 * handle to `*out` (null on failure). Release with `kfree_window_free`.
 *
 * # Safety
 * `out` must be null or valid for a pointer write.
 */
enum KfreeStatus kfree_window_new(uint32_t k, uint64_t lo, uint64_t hi, struct KfreeWindow **out);

/**
 * Writes the window's [lo, hi) bounds.
 *
 * # Safety
 * `win` must be null or a live handle from `kfree_window_new`; `lo` and `hi`
 * must each be null or valid for a `u64` write.
 */
enum KfreeStatus kfree_window_bounds(const struct KfreeWindow *win, uint64_t *lo, uint64_t *hi);

/**
 * Writes 1 to `*out` when n is k-free, else 0. n must lie inside the
 * window's [lo, hi); outside values report `Domain`.
 *
 * # Safety
 * `win` must be null or a live handle from `kfree_window_new`; `out` must be
 * null or valid for a `bool` write.
 */
enum KfreeStatus kfree_window_get(const struct KfreeWindow *win, uint64_t n, bool *out);

/**
 * Writes #{n in [a, b) ∩ window : n k-free} to `*out`; the range is clamped
 * to the window, so out-of-window spans contribute zero.
 *
 * # Safety
 * `win` must be null or a live handle from `kfree_window_new`; `out` must be
 * null or valid for a `u64` write.
 */
enum KfreeStatus kfree_window_count(const struct KfreeWindow *win,
                                    uint64_t a,
                                    uint64_t b,
                                    uint64_t *out);

/**
 * Releases a window handle. Null is a no-op; a handle must not be used after
 * being freed.
 *
 * # Safety
 * `win` must be null or a live handle from `kfree_window_new`, and must not
 * be freed twice.
 */
void kfree_window_free(struct KfreeWindow *win);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KFREE_H */

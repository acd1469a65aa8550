//! C ABI over the `kfree` crate. Every fallible entry point returns a
//! [`KfreeStatus`] and writes results through out-pointers; sieved windows are
//! handed out as opaque heap pointers with an explicit `free`. A thread-local
//! message slot ([`kfree_last_error`]) carries the detail behind the most
//! recent non-`Ok` status. The C header is generated into `include/kfree.h`
//! at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::ptr;

use kfree::shift::ShiftTuple;
use kfree::sieve::{self, SieveConfig};
use kfree::singular;
use kfree::Error;

/// Result code for every fallible call. `Ok` is zero; everything else
/// leaves out-parameters untouched (except where documented) and stores a
/// human-readable message retrievable via `kfree_last_error`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KfreeStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Arguments outside the mathematical domain (k < 2, n = 0, empty tuple, ...).
    Domain = 2,
    /// The request exceeds a hard memory/size budget.
    Capacity = 3,
    /// The request exceeds the internal work budget.
    Budget = 4,
    /// The requested tolerance cannot be certified.
    Precision = 5,
    /// Operating-system I/O failure.
    Io = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: KfreeStatus, msg: impl Into<Vec<u8>>) -> KfreeStatus {
    let msg = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
    status
}

fn fail_with(err: &Error) -> KfreeStatus {
    let status = match err {
        Error::Domain(_) => KfreeStatus::Domain,
        Error::Capacity { .. } => KfreeStatus::Capacity,
        Error::Budget { .. } => KfreeStatus::Budget,
        Error::Precision { .. } => KfreeStatus::Precision,
        Error::Io(_) => KfreeStatus::Io,
    };
    fail(status, err.to_string())
}

/// Crate version as a static NUL-terminated string. Never null; do not free.
#[no_mangle]
pub extern "C" fn kfree_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Short static name for a status code ("ok", "domain", ...). Never null; do
/// not free.
#[no_mangle]
pub extern "C" fn kfree_status_name(status: KfreeStatus) -> *const c_char {
    match status {
        KfreeStatus::Ok => c"ok",
        KfreeStatus::NullPointer => c"null pointer",
        KfreeStatus::Domain => c"domain",
        KfreeStatus::Capacity => c"capacity",
        KfreeStatus::Budget => c"budget",
        KfreeStatus::Precision => c"precision",
        KfreeStatus::Io => c"io",
    }
    .as_ptr()
}

/// Message describing the most recent failure on the calling thread, or an
/// empty string if none. The pointer stays valid until the next failing call
/// on the same thread; do not free.
#[no_mangle]
pub extern "C" fn kfree_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.as_ptr(),
        None => c"".as_ptr(),
    })
}

/// Writes 1 to `*out` when n has no k-th power divisor > 1, else 0.
/// Requires n >= 1 and k >= 2.
///
/// # Safety
/// `out` must be null or valid for a `bool` write.
#[no_mangle]
pub unsafe extern "C" fn kfree_is_kfree(n: u64, k: u32, out: *mut bool) -> KfreeStatus {
    if out.is_null() {
        return fail(KfreeStatus::NullPointer, "out pointer is null");
    }
    match sieve::is_kfree(n, k) {
        Ok(v) => {
            *out = v;
            KfreeStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Writes #{1 <= n <= limit : n is k-free} to `*out`. Runs in O(limit^{1/k});
/// limits with limit^{1/k} > 2^27 are rejected with `Capacity`.
///
/// # Safety
/// `out` must be null or valid for a `u64` write.
#[no_mangle]
pub unsafe extern "C" fn kfree_count_upto(k: u32, limit: u64, out: *mut u64) -> KfreeStatus {
    if out.is_null() {
        return fail(KfreeStatus::NullPointer, "out pointer is null");
    }
    match sieve::count_kfree(k, limit) {
        Ok(v) => {
            *out = v;
            KfreeStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Writes the asymptotic density of k-free numbers, 1/zeta(k), to `*value`,
/// with a certified error bound <= tol in `*err`.
///
/// # Safety
/// `value` and `err` must each be null or valid for an `f64` write.
#[no_mangle]
pub unsafe extern "C" fn kfree_zeta_inverse(
    k: u32,
    tol: f64,
    value: *mut f64,
    err: *mut f64,
) -> KfreeStatus {
    if value.is_null() || err.is_null() {
        return fail(KfreeStatus::NullPointer, "value/err pointer is null");
    }
    match singular::zeta_inverse(k, tol) {
        Ok(enc) => {
            *value = enc.to_f64();
            *err = enc.err_f64();
            KfreeStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Writes the singular-series density for the shift tuple
/// (shifts[0], ..., shifts[num_shifts-1]) over the progression modulus q:
/// the limiting proportion, within one residue class mod q, of n for which
/// n + shift is k-free simultaneously for every shift. `*err` receives a
/// certified error bound <= tol.
///
/// # Safety
/// `shifts` must be null or valid for reading `num_shifts` i64 values;
/// `value` and `err` must each be null or valid for an `f64` write.
#[no_mangle]
pub unsafe extern "C" fn kfree_singular_series(
    q: u64,
    k: u32,
    shifts: *const i64,
    num_shifts: usize,
    tol: f64,
    value: *mut f64,
    err: *mut f64,
) -> KfreeStatus {
    if value.is_null() || err.is_null() {
        return fail(KfreeStatus::NullPointer, "value/err pointer is null");
    }
    let values = if num_shifts == 0 {
        Vec::new()
    } else {
        if shifts.is_null() {
            return fail(KfreeStatus::NullPointer, "shifts pointer is null");
        }
        std::slice::from_raw_parts(shifts, num_shifts).to_vec()
    };
    let tuple = match ShiftTuple::new(values, k, q) {
        Ok(t) => t,
        Err(e) => return fail_with(&e),
    };
    match singular::singular_aqh(&tuple, tol) {
        Ok(enc) => {
            *value = enc.to_f64();
            *err = enc.err_f64();
            KfreeStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Opaque handle to a sieved window of k-free indicator bits.
pub struct KfreeWindow {
    inner: sieve::KfreeWindow,
}

/// Sieves the k-free indicator over [lo, hi) and writes a heap-allocated
/// handle to `*out` (null on failure). Release with `kfree_window_free`.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn kfree_window_new(
    k: u32,
    lo: u64,
    hi: u64,
    out: *mut *mut KfreeWindow,
) -> KfreeStatus {
    if out.is_null() {
        return fail(KfreeStatus::NullPointer, "out pointer is null");
    }
    *out = ptr::null_mut();
    let cfg = match SieveConfig::new(k, lo, hi) {
        Ok(c) => c,
        Err(e) => return fail_with(&e),
    };
    match sieve::sieve_range(&cfg) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(KfreeWindow { inner }));
            KfreeStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Writes the window's [lo, hi) bounds.
///
/// # Safety
/// `win` must be null or a live handle from `kfree_window_new`; `lo` and `hi`
/// must each be null or valid for a `u64` write.
#[no_mangle]
pub unsafe extern "C" fn kfree_window_bounds(
    win: *const KfreeWindow,
    lo: *mut u64,
    hi: *mut u64,
) -> KfreeStatus {
    if win.is_null() || lo.is_null() || hi.is_null() {
        return fail(KfreeStatus::NullPointer, "win/lo/hi pointer is null");
    }
    *lo = (*win).inner.lo();
    *hi = (*win).inner.hi();
    KfreeStatus::Ok
}

/// Writes 1 to `*out` when n is k-free, else 0. n must lie inside the
/// window's [lo, hi); outside values report `Domain`.
///
/// # Safety
/// `win` must be null or a live handle from `kfree_window_new`; `out` must be
/// null or valid for a `bool` write.
#[no_mangle]
pub unsafe extern "C" fn kfree_window_get(
    win: *const KfreeWindow,
    n: u64,
    out: *mut bool,
) -> KfreeStatus {
    if win.is_null() || out.is_null() {
        return fail(KfreeStatus::NullPointer, "win/out pointer is null");
    }
    let w = &(*win).inner;
    if n < w.lo() || n >= w.hi() {
        return fail(
            KfreeStatus::Domain,
            format!("n={} outside window [{}, {})", n, w.lo(), w.hi()),
        );
    }
    *out = w.get(n);
    KfreeStatus::Ok
}

/// Writes #{n in [a, b) ∩ window : n k-free} to `*out`; the range is clamped
/// to the window, so out-of-window spans contribute zero.
///
/// # Safety
/// `win` must be null or a live handle from `kfree_window_new`; `out` must be
/// null or valid for a `u64` write.
#[no_mangle]
pub unsafe extern "C" fn kfree_window_count(
    win: *const KfreeWindow,
    a: u64,
    b: u64,
    out: *mut u64,
) -> KfreeStatus {
    if win.is_null() || out.is_null() {
        return fail(KfreeStatus::NullPointer, "win/out pointer is null");
    }
    *out = (*win).inner.count_range(a, b);
    KfreeStatus::Ok
}

/// Releases a window handle. Null is a no-op; a handle must not be used after
/// being freed.
///
/// # Safety
/// `win` must be null or a live handle from `kfree_window_new`, and must not
/// be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kfree_window_free(win: *mut KfreeWindow) {
    if !win.is_null() {
        drop(Box::from_raw(win));
    }
}

//! C ABI for the decomposition library.
//!
//! Hypergraphs and decompositions are opaque handles created and freed
//! here; every fallible call returns a [`GhdincStatus`] and the last error
//! message is kept per thread for [`ghdinc_last_error`]. Decompositions
//! cross the boundary as JSON strings in the library's canonical format.
//!
//! The committed header `include/ghdinc.h` is generated with cbindgen:
//!
//! ```text
//! cbindgen --crate ghdinc-capi --config cbindgen.toml --output include/ghdinc.h
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ghdinc::decompose::{decompose_with_deadline, validate, DecomposeOutcome, Ghd};
use ghdinc::hypergraph::Hypergraph;
use ghdinc::modify::Modification;
use ghdinc::update::update_pipeline;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GhdincStatus {
    /// Success.
    GhdincOk = 0,
    /// No decomposition within the width bound exists.
    GhdincReject = 1,
    /// Malformed input (text, JSON, or precondition violation).
    GhdincErrParse = 2,
    /// The cooperative deadline expired.
    GhdincTimeout = 3,
    /// A decomposition failed validation.
    GhdincErrInvalid = 4,
    /// A required pointer argument was null.
    GhdincErrNull = 5,
    /// A string argument was not valid UTF-8.
    GhdincErrUtf8 = 6,
    /// The library panicked; state may be inconsistent.
    GhdincErrPanic = 7,
}

use GhdincStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let owned = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

/// Message for the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ghdinc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opaque hypergraph handle.
pub struct GhdincHypergraph(Hypergraph);

/// Opaque decomposition handle.
pub struct GhdincGhd(Ghd);

unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, GhdincStatus> {
    if ptr.is_null() {
        set_error("null pointer argument");
        return Err(GhdincErrNull);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        GhdincErrUtf8
    })
}

fn guard(f: impl FnOnce() -> GhdincStatus) -> GhdincStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            GhdincErrPanic
        }
    }
}

fn deadline_from_ms(timeout_ms: u64) -> Option<Instant> {
    (timeout_ms > 0).then(|| Instant::now() + Duration::from_millis(timeout_ms))
}

/// Parses hypergraph text into a new handle; free with
/// [`ghdinc_hypergraph_free`].
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_hypergraph_parse(
    text: *const c_char,
    out: *mut *mut GhdincHypergraph,
) -> GhdincStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return GhdincErrNull;
        }
        let text = match utf8_arg(text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match Hypergraph::parse(text) {
            Ok(h) => {
                *out = Box::into_raw(Box::new(GhdincHypergraph(h)));
                GhdincOk
            }
            Err(e) => {
                set_error(e);
                GhdincErrParse
            }
        }
    })
}

/// Serializes a hypergraph to its canonical text; free the result with
/// [`ghdinc_string_free`].
///
/// # Safety
/// `h` must be a live handle from this library and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_hypergraph_to_text(
    h: *const GhdincHypergraph,
    out: *mut *mut c_char,
) -> GhdincStatus {
    guard(|| {
        if h.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GhdincErrNull;
        }
        let text = (*h).0.to_text();
        *out = CString::new(text).unwrap_or_default().into_raw();
        GhdincOk
    })
}

/// # Safety
/// `h` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_hypergraph_free(h: *mut GhdincHypergraph) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Computes a decomposition of width at most `width`. `timeout_ms` of 0
/// means no deadline.
///
/// # Safety
/// `h` must be a live hypergraph handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_decompose(
    h: *const GhdincHypergraph,
    width: u32,
    timeout_ms: u64,
    out: *mut *mut GhdincGhd,
) -> GhdincStatus {
    guard(|| {
        if h.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GhdincErrNull;
        }
        match decompose_with_deadline(&(*h).0, width as usize, deadline_from_ms(timeout_ms)) {
            Ok(d) => match d.outcome {
                DecomposeOutcome::Found(g) => {
                    *out = Box::into_raw(Box::new(GhdincGhd(g)));
                    GhdincOk
                }
                DecomposeOutcome::Reject => {
                    set_error(format!("no decomposition of width <= {width}"));
                    GhdincReject
                }
                DecomposeOutcome::TimedOut => {
                    set_error("timed out");
                    GhdincTimeout
                }
            },
            Err(e) => {
                set_error(e);
                GhdincErrParse
            }
        }
    })
}

/// Updates a decomposition after a modification, given as modification
/// JSON. On success `out` holds a decomposition of the modified
/// hypergraph with width at most `width`.
///
/// # Safety
/// `h` and `ghd` must be live handles, `modification_json` a
/// NUL-terminated string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_update(
    h: *const GhdincHypergraph,
    modification_json: *const c_char,
    ghd: *const GhdincGhd,
    width: u32,
    timeout_ms: u64,
    out: *mut *mut GhdincGhd,
) -> GhdincStatus {
    guard(|| {
        if h.is_null() || ghd.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GhdincErrNull;
        }
        let json = match utf8_arg(modification_json) {
            Ok(j) => j,
            Err(status) => return status,
        };
        let modification = match Modification::from_json(json) {
            Ok(m) => m,
            Err(e) => {
                set_error(e);
                return GhdincErrParse;
            }
        };
        match update_pipeline(
            &(*h).0,
            &modification,
            &(*ghd).0,
            width as usize,
            deadline_from_ms(timeout_ms),
        ) {
            Ok(run) => match run.outcome {
                DecomposeOutcome::Found(g) => {
                    *out = Box::into_raw(Box::new(GhdincGhd(g)));
                    GhdincOk
                }
                DecomposeOutcome::Reject => {
                    set_error(format!("the modification does not admit width <= {width}"));
                    GhdincReject
                }
                DecomposeOutcome::TimedOut => {
                    set_error("timed out");
                    GhdincTimeout
                }
            },
            Err(e) => {
                set_error(e);
                GhdincErrParse
            }
        }
    })
}

/// Checks a decomposition against a hypergraph at the given width bound.
/// Returns `GhdincOk` when valid, `GhdincErrInvalid` otherwise (the first
/// violation is reported through [`ghdinc_last_error`]).
///
/// # Safety
/// `h` and `ghd` must be live handles from this library.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_validate(
    h: *const GhdincHypergraph,
    ghd: *const GhdincGhd,
    width: u32,
) -> GhdincStatus {
    guard(|| {
        if h.is_null() || ghd.is_null() {
            set_error("null pointer argument");
            return GhdincErrNull;
        }
        let violations = validate(&(*h).0, &(*ghd).0, width as usize);
        match violations.first() {
            None => GhdincOk,
            Some(v) => {
                set_error(v);
                GhdincErrInvalid
            }
        }
    })
}

/// Decomposition width.
///
/// # Safety
/// `ghd` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_ghd_width(ghd: *const GhdincGhd) -> u32 {
    if ghd.is_null() {
        return 0;
    }
    (*ghd).0.width as u32
}

/// Serializes a decomposition to JSON; free the result with
/// [`ghdinc_string_free`].
///
/// # Safety
/// `ghd` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_ghd_to_json(
    ghd: *const GhdincGhd,
    out: *mut *mut c_char,
) -> GhdincStatus {
    guard(|| {
        if ghd.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GhdincErrNull;
        }
        let json = (*ghd).0.to_json();
        *out = CString::new(json).unwrap_or_default().into_raw();
        GhdincOk
    })
}

/// Parses decomposition JSON into a new handle; free with
/// [`ghdinc_ghd_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_ghd_from_json(
    json: *const c_char,
    out: *mut *mut GhdincGhd,
) -> GhdincStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return GhdincErrNull;
        }
        let json = match utf8_arg(json) {
            Ok(j) => j,
            Err(status) => return status,
        };
        match Ghd::from_json(json) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(GhdincGhd(g)));
                GhdincOk
            }
            Err(e) => {
                set_error(e);
                GhdincErrParse
            }
        }
    })
}

/// # Safety
/// `ghd` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_ghd_free(ghd: *mut GhdincGhd) {
    if !ghd.is_null() {
        drop(Box::from_raw(ghd));
    }
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghdinc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

//! C ABI over `hyperberry`.
//!
//! Parameters and constant sets live behind opaque handles. Every fallible
//! call returns an [`HbStatus`] and writes its result through an out
//! pointer; on failure the message is available from
//! [`hb_last_error_message`] on the same thread. Strings returned to the
//! caller must be released with [`hb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hyperberry::bounds::{bound_profile, nonuniform_bound, tail_bound, uniform_bound, ConstantSet};
use hyperberry::exact::{cdf_exact, mode, moments, pmf_exact, sf_exact};
use hyperberry::lab::delta_exact;
use hyperberry::stirling::certified_pmf;
use hyperberry::{Error, HypParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbStatus {
    Ok = 0,
    InvalidArgument = 1,
    GateRefused = 2,
    NullPointer = 3,
    Internal = 4,
}

/// Opaque `Hyp(n; M, N)` parameters.
pub struct HbParams(HypParams);

/// Opaque calibrated or proof-traced constant set.
pub struct HbConstants(ConstantSet);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HbMoments {
    pub mean: f64,
    pub variance: f64,
    pub sigma2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HbCertified {
    pub log_main: f64,
    pub rem_bound: f64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HbBoundProfile {
    pub f_bar: f64,
    pub a1: f64,
    pub delta: f64,
    pub sigma: f64,
    pub gate_ok: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HbDelta {
    pub delta_sup: f64,
    pub argmax_k: u64,
    pub sigma: f64,
    pub delta_times_sigma: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HbStatus {
    match e {
        Error::Gate(_) | Error::ErrorBudget { .. } => HbStatus::GateRefused,
        Error::InvalidParams { .. } | Error::InvalidArgument(_) | Error::Config { .. } | Error::Json(_) => {
            HbStatus::InvalidArgument
        }
        _ => HbStatus::Internal,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (HbStatus, String)>) -> HbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HbStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            HbStatus::Internal
        }
    }
}

fn lib<T>(r: hyperberry::Result<T>) -> Result<T, (HbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HbStatus, String)> {
    p.as_ref().ok_or_else(|| (HbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), (HbStatus, String)> {
    if out.is_null() {
        return Err((HbStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(v);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn hb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn hb_params_new(n: u64, m: u64, pop: u64, out: *mut *mut HbParams) -> HbStatus {
    guard(|| {
        let h = lib(HypParams::new(n, m, pop))?;
        write(out, Box::into_raw(Box::new(HbParams(h))))
    })
}

/// # Safety
/// `p` must be null or a handle from [`hb_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hb_params_free(p: *mut HbParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// `P(X = k)`; zero outside the support.
///
/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_pmf(p: *const HbParams, k: i64, out: *mut f64) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        write(out, pmf_exact(&h.0, k).to_f64())
    })
}

/// `P(X <= k)`.
///
/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_cdf(p: *const HbParams, k: i64, out: *mut f64) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        write(out, cdf_exact(&h.0, k).to_f64())
    })
}

/// `P(X > k)`.
///
/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_sf(p: *const HbParams, k: i64, out: *mut f64) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        write(out, sf_exact(&h.0, k).to_f64())
    })
}

/// Exact `P(X = k)` as `"num/den"` on the rational backend, decimal
/// otherwise. Free the result with [`hb_string_free`].
///
/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_pmf_string(p: *const HbParams, k: i64, out: *mut *mut c_char) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        write(out, to_c_string(pmf_exact(&h.0, k).to_string()))
    })
}

/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_moments(p: *const HbParams, out: *mut HbMoments) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        let m = moments(&h.0);
        write(
            out,
            HbMoments {
                mean: m.mean_f64(),
                variance: m.variance_f64(),
                sigma2: m.sigma2_f64(),
            },
        )
    })
}

/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_mode(p: *const HbParams, out: *mut u64) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        write(out, mode(&h.0))
    })
}

/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_certified_pmf(p: *const HbParams, k: i64, delta: f64, out: *mut HbCertified) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        let c = lib(certified_pmf(&h.0, k, delta))?;
        write(
            out,
            HbCertified {
                log_main: c.log_main,
                rem_bound: c.rem_bound,
                value: c.value,
                lo: c.lo,
                hi: c.hi,
            },
        )
    })
}

/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_bound_profile(p: *const HbParams, out: *mut HbBoundProfile) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        let b = bound_profile(&h.0);
        write(
            out,
            HbBoundProfile {
                f_bar: b.f_bar,
                a1: b.a1,
                delta: b.delta,
                sigma: b.sigma,
                gate_ok: b.gate_ok,
            },
        )
    })
}

/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_delta(p: *const HbParams, out: *mut HbDelta) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        let r = lib(delta_exact(&h.0))?;
        write(
            out,
            HbDelta {
                delta_sup: r.delta_sup,
                argmax_k: r.argmax_k,
                sigma: r.sigma,
                delta_times_sigma: r.delta_times_sigma,
            },
        )
    })
}

/// Parse and validate a constant set from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_constants_from_json(json: *const c_char, out: *mut *mut HbConstants) -> HbStatus {
    guard(|| {
        if json.is_null() {
            return Err((HbStatus::NullPointer, "json is null".into()));
        }
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (HbStatus::InvalidArgument, "json is not UTF-8".to_string()))?;
        let c = lib(ConstantSet::from_json(s))?;
        write(out, Box::into_raw(Box::new(HbConstants(c))))
    })
}

/// # Safety
/// `c` must be a live constants handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_constants_to_json(c: *const HbConstants, out: *mut *mut c_char) -> HbStatus {
    guard(|| {
        let c = deref(c, "constants")?;
        write(out, to_c_string(c.0.to_json()))
    })
}

/// # Safety
/// `c` must be null or a handle from [`hb_constants_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hb_constants_free(c: *mut HbConstants) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_uniform_bound(p: *const HbParams, c: *const HbConstants, out: *mut f64) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        let c = deref(c, "constants")?;
        write(out, uniform_bound(&h.0, &c.0).value)
    })
}

/// Refuses with `GateRefused` unless `delta * sigma > 1`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_nonuniform_bound(
    p: *const HbParams,
    c: *const HbConstants,
    x: f64,
    out: *mut f64,
) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        let c = deref(c, "constants")?;
        write(out, lib(nonuniform_bound(&h.0, x, &c.0))?.value)
    })
}

/// Bound on `P(|X - np|/sigma >= x)` for `x > 0`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_tail_bound(p: *const HbParams, c: *const HbConstants, x: f64, out: *mut f64) -> HbStatus {
    guard(|| {
        let h = deref(p, "params")?;
        let c = deref(c, "constants")?;
        write(out, lib(tail_bound(&h.0, x, &c.0))?.value)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::InvalidArgument("x".into())), HbStatus::InvalidArgument);
        assert_eq!(
            status_of(&Error::ErrorBudget { delta: 1e-12, budget: 1e-10 }),
            HbStatus::GateRefused
        );
        assert_eq!(status_of(&Error::Calibration("x".into())), HbStatus::Internal);
    }

    #[test]
    fn panics_become_internal() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, HbStatus::Internal);
        let msg = unsafe { CStr::from_ptr(hb_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }
}

//! C ABI over the `galbrun` crate.
//!
//! Problems are opaque handles created from TOML text and released with
//! [`galbrun_problem_free`]. Every entry point returns a [`GalbrunStatus`];
//! on failure the message is available from [`galbrun_last_error`] on the
//! same thread. No panic crosses the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use galbrun::c64;
use galbrun::coefficients::{check_admissibility, compute_theta, sector_angle, validate_level, ConditionName, ProblemConfig};
use galbrun::solver::{solve_cowling, solve_full, Discretization, SolverPath};
use galbrun::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalbrunStatus {
    Ok = 0,
    /// Null pointer, invalid UTF-8 or an out-of-range enum value.
    InvalidArgument = 1,
    /// Configuration, validation or precondition failure.
    Validation = 2,
    /// Singular system or solver breakdown.
    SolverBreakdown = 3,
    /// Output buffer too small; the required length was still written.
    BufferTooSmall = 4,
    /// Internal panic.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalbrunModel {
    Cowling = 0,
    FullDirect = 1,
    FullSchur = 2,
}

/// Opaque problem handle.
pub struct GalbrunProblem {
    cfg: ProblemConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: GalbrunStatus, msg: impl Into<String>) -> GalbrunStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> GalbrunStatus {
    let status = if e.exit_code() == 2 {
        GalbrunStatus::SolverBreakdown
    } else {
        GalbrunStatus::Validation
    };
    fail(status, format!("{}: {e}", e.kind()))
}

fn guard(f: impl FnOnce() -> GalbrunStatus) -> GalbrunStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(GalbrunStatus::Internal, msg)
        }
    }
}

/// Parses and validates `toml` (NUL-terminated UTF-8) into `*out`.
///
/// # Safety
/// `toml` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn galbrun_problem_from_toml(toml: *const c_char, out: *mut *mut GalbrunProblem) -> GalbrunStatus {
    guard(|| {
        if toml.is_null() || out.is_null() {
            return fail(GalbrunStatus::InvalidArgument, "null pointer");
        }
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            return fail(GalbrunStatus::InvalidArgument, "config is not UTF-8");
        };
        let cfg = match ProblemConfig::from_toml(text) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        if let Err(e) = validate_level(&cfg, 0) {
            return from_error(e);
        }
        *out = Box::into_raw(Box::new(GalbrunProblem { cfg }));
        GalbrunStatus::Ok
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `p` must come from [`galbrun_problem_from_toml`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn galbrun_problem_free(p: *mut GalbrunProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of vector unknowns of the Cowling system at `level`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn galbrun_problem_ndofs(p: *const GalbrunProblem, level: u32, out: *mut usize) -> GalbrunStatus {
    guard(|| {
        if p.is_null() || out.is_null() {
            return fail(GalbrunStatus::InvalidArgument, "null pointer");
        }
        match validate_level(&(*p).cfg, level as usize).and_then(|vp| Discretization::new(vp, false)) {
            Ok(d) => {
                *out = d.vector_space.ndofs();
                GalbrunStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sector angle `θ` over the coarsest mesh and the margin of the
/// subsonic condition `1/(1 + tan²θ) − ‖c⁻¹b‖²∞`.
///
/// # Safety
/// `p` must be a live handle; `theta` and `margin` writable.
#[no_mangle]
pub unsafe extern "C" fn galbrun_check(p: *const GalbrunProblem, theta: *mut f64, margin: *mut f64) -> GalbrunStatus {
    guard(|| {
        if p.is_null() || theta.is_null() || margin.is_null() {
            return fail(GalbrunStatus::InvalidArgument, "null pointer");
        }
        let cfg = &(*p).cfg;
        let run = || -> galbrun::Result<(f64, f64)> {
            let vp = validate_level(cfg, 0)?;
            let sector = compute_theta(cfg, &vp.quad_points, false)?;
            let rep = check_admissibility(cfg, sector.theta, None, &vp.quad_points, Some(&[ConditionName::Thm310]))?;
            Ok((sector.theta, rep.conditions[0].margin))
        };
        match run() {
            Ok((t, m)) => {
                *theta = t;
                *margin = m;
                GalbrunStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sector angle of the numerical range of a 3×3 complex matrix given as
/// row-major real and imaginary parts.
///
/// # Safety
/// `re` and `im` must point to 9 doubles each; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn galbrun_sector_angle(re: *const f64, im: *const f64, out: *mut f64) -> GalbrunStatus {
    guard(|| {
        if re.is_null() || im.is_null() || out.is_null() {
            return fail(GalbrunStatus::InvalidArgument, "null pointer");
        }
        let (re, im) = (std::slice::from_raw_parts(re, 9), std::slice::from_raw_parts(im, 9));
        if re.iter().chain(im).any(|v| !v.is_finite()) {
            return fail(GalbrunStatus::InvalidArgument, "matrix entries must be finite");
        }
        let m = std::array::from_fn(|i| std::array::from_fn(|j| c64::new(re[3 * i + j], im[3 * i + j])));
        *out = sector_angle(&m);
        GalbrunStatus::Ok
    })
}

/// Solves for the configured volume force at `level`. The displacement
/// coefficients are written interleaved (`re, im, re, im, ...`) to `xi`,
/// which holds `cap` doubles; `*len` receives the number of doubles needed.
/// With `cap` too small nothing but `*len` is written.
///
/// # Safety
/// `p` must be a live handle; `xi` must hold `cap` doubles (it may be null
/// when `cap` is 0); `len` and `residual` writable.
#[no_mangle]
pub unsafe extern "C" fn galbrun_solve(
    p: *const GalbrunProblem,
    model: GalbrunModel,
    level: u32,
    xi: *mut f64,
    cap: usize,
    len: *mut usize,
    residual: *mut f64,
) -> GalbrunStatus {
    guard(|| {
        if p.is_null() || len.is_null() || residual.is_null() || (xi.is_null() && cap > 0) {
            return fail(GalbrunStatus::InvalidArgument, "null pointer");
        }
        let cfg = &(*p).cfg;
        let Some(force) = cfg.force.clone() else {
            return fail(GalbrunStatus::Validation, "Config: solving needs `[source] f`");
        };
        let run = || -> galbrun::Result<_> {
            let disc = Discretization::new(validate_level(cfg, level as usize)?, model != GalbrunModel::Cowling)?;
            let rhs = disc.rhs(&force);
            match model {
                GalbrunModel::Cowling => solve_cowling(&disc, &rhs),
                GalbrunModel::FullDirect => solve_full(&disc, &rhs, SolverPath::DirectCoupled),
                GalbrunModel::FullSchur => solve_full(&disc, &rhs, SolverPath::Schur),
            }
        };
        let res = match run() {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        let need = 2 * res.xi.len();
        *len = need;
        if cap < need {
            return fail(GalbrunStatus::BufferTooSmall, format!("need {need} doubles, got {cap}"));
        }
        let out = std::slice::from_raw_parts_mut(xi, need);
        for (k, z) in res.xi.iter().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        *residual = res.residual;
        GalbrunStatus::Ok
    })
}

/// Copy of the last error message of this thread, or null when the last
/// call succeeded. Release it with [`galbrun_string_free`].
#[no_mangle]
pub extern "C" fn galbrun_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null_mut(), |s| s.clone().into_raw()))
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from [`galbrun_last_error`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn galbrun_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

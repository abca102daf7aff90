//! C ABI over the exponent calculus and the minimal-solution solver.
//!
//! Objects are opaque handles created by `*_new` functions and released by
//! the matching `*_free`. Every fallible call returns a [`ChqStatus`]; the
//! message for the most recent failure on the calling thread is available
//! from [`chq_last_error_message`]. Strings returned by the library are
//! released with [`chq_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use choquard::exponents::{classify, ProblemExponents, Trigger};
use choquard::radial::{build_grid, RadialProfile};
use choquard::rational::parse_rational;
use choquard::solver::{
    estimate_barrier_constant, solve_minimal, Operators, ProblemInstance, SolveOutcome, SolverError,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Supercritical = 3,
    Diverged = 4,
    Undetermined = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Bit set in the trigger mask of [`chq_classify`].
pub const CHQ_TRIGGER_SUM: u32 = 1;
pub const CHQ_TRIGGER_P: u32 = 2;
pub const CHQ_TRIGGER_Q: u32 = 4;

/// Exponent tuple `(N, alpha, p, q)`.
pub struct ChqExponents(ProblemExponents);

/// Assembled operators for one exponent tuple and grid.
pub struct ChqSolver {
    exponents: ProblemExponents,
    ops: Operators,
}

/// Converged solution profile.
pub struct ChqProfile(RadialProfile);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: ChqStatus, msg: impl Into<String>) -> ChqStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> ChqStatus) -> ChqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ChqStatus::Panic, "internal panic"),
    }
}

fn solver_status(e: &SolverError) -> ChqStatus {
    match e {
        SolverError::Supercritical(_) => ChqStatus::Supercritical,
        SolverError::InvalidInstance(_) | SolverError::InvalidBracket(_) => ChqStatus::InvalidArgument,
        _ => ChqStatus::Numerical,
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, ChqStatus> {
    if p.is_null() {
        return Err(fail(ChqStatus::NullPointer, format!("{name} is NULL")));
    }
    // SAFETY: caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(ChqStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn chq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn chq_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: allocated by CString::into_raw in this crate.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses `alpha`, `p`, `q` from `"a/b"` or decimal strings.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chq_exponents_new(
    n: u32,
    alpha: *const c_char,
    p: *const c_char,
    q: *const c_char,
    out: *mut *mut ChqExponents,
) -> ChqStatus {
    guard(|| {
        if out.is_null() {
            return fail(ChqStatus::NullPointer, "out is NULL");
        }
        let parse = |s: *const c_char, name: &str| -> Result<_, ChqStatus> {
            // SAFETY: forwarded caller contract.
            let text = unsafe { read_str(s, name) }?;
            parse_rational(text).map_err(|e| fail(ChqStatus::InvalidArgument, format!("{name}: {e}")))
        };
        let (a, pp, qq) = match (parse(alpha, "alpha"), parse(p, "p"), parse(q, "q")) {
            (Ok(a), Ok(p), Ok(q)) => (a, p, q),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        match ProblemExponents::new(n, a, pp, qq) {
            Ok(e) => {
                // SAFETY: checked non-null above.
                unsafe { *out = Box::into_raw(Box::new(ChqExponents(e))) };
                ChqStatus::Ok
            }
            Err(e) => fail(ChqStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `e` must come from [`chq_exponents_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn chq_exponents_free(e: *mut ChqExponents) {
    if !e.is_null() {
        // SAFETY: allocated by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(e) });
    }
}

/// Writes whether the exponents are subcritical and the mask of fired
/// thresholds (`CHQ_TRIGGER_*`).
///
/// # Safety
/// `e` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn chq_classify(e: *const ChqExponents, subcritical: *mut bool, triggers: *mut u32) -> ChqStatus {
    guard(|| {
        if e.is_null() || subcritical.is_null() || triggers.is_null() {
            return fail(ChqStatus::NullPointer, "NULL argument");
        }
        // SAFETY: checked non-null; caller guarantees validity.
        let report = classify(unsafe { &(*e).0 });
        let mask = report.triggers.iter().fold(0, |m, t| {
            m | match t {
                Trigger::Sum => CHQ_TRIGGER_SUM,
                Trigger::P => CHQ_TRIGGER_P,
                Trigger::Q => CHQ_TRIGGER_Q,
            }
        });
        // SAFETY: checked non-null.
        unsafe {
            *subcritical = report.is_subcritical();
            *triggers = mask;
        }
        ChqStatus::Ok
    })
}

/// Classification report as a JSON string, freed with [`chq_string_free`].
///
/// # Safety
/// `e` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chq_classify_json(e: *const ChqExponents, out: *mut *mut c_char) -> ChqStatus {
    guard(|| {
        if e.is_null() || out.is_null() {
            return fail(ChqStatus::NullPointer, "NULL argument");
        }
        // SAFETY: checked non-null.
        let report = classify(unsafe { &(*e).0 });
        match serde_json::to_string(&report).map(CString::new) {
            Ok(Ok(s)) => {
                // SAFETY: checked non-null.
                unsafe { *out = s.into_raw() };
                ChqStatus::Ok
            }
            _ => fail(ChqStatus::Numerical, "cannot serialize report"),
        }
    })
}

/// Builds the geometric grid and assembles the operators. Supercritical
/// exponents are rejected here.
///
/// # Safety
/// `e` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chq_solver_new(
    e: *const ChqExponents,
    r_min: f64,
    r_max: f64,
    points_per_decade: u32,
    out: *mut *mut ChqSolver,
) -> ChqStatus {
    guard(|| {
        if e.is_null() || out.is_null() {
            return fail(ChqStatus::NullPointer, "NULL argument");
        }
        // SAFETY: checked non-null.
        let exponents = unsafe { (*e).0.clone() };
        let report = classify(&exponents);
        if !report.is_subcritical() {
            return fail(ChqStatus::Supercritical, report.trigger_summary());
        }
        let grid = match build_grid(r_min, r_max, points_per_decade) {
            Ok(g) => g,
            Err(err) => return fail(ChqStatus::InvalidArgument, err.to_string()),
        };
        if let Err(err) = choquard::solver::check_grid(&grid) {
            return fail(ChqStatus::InvalidArgument, err.to_string());
        }
        match Operators::assemble(&exponents, &grid) {
            Ok(ops) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(ChqSolver { exponents, ops })) };
                ChqStatus::Ok
            }
            Err(err) => fail(solver_status(&err), err.to_string()),
        }
    })
}

/// # Safety
/// `s` must come from [`chq_solver_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn chq_solver_free(s: *mut ChqSolver) {
    if !s.is_null() {
        // SAFETY: allocated by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Empirical barrier constant `c_hat` and the threshold `khat_q` below
/// which the barrier argument applies.
///
/// # Safety
/// `s` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn chq_barrier_constant(s: *const ChqSolver, c_hat: *mut f64, khat_q: *mut f64) -> ChqStatus {
    guard(|| {
        if s.is_null() || c_hat.is_null() || khat_q.is_null() {
            return fail(ChqStatus::NullPointer, "NULL argument");
        }
        // SAFETY: checked non-null.
        let s = unsafe { &*s };
        match estimate_barrier_constant(&s.exponents, &s.ops) {
            Ok(b) => {
                // SAFETY: checked non-null.
                unsafe {
                    *c_hat = b.c_hat;
                    *khat_q = b.khat_q;
                }
                ChqStatus::Ok
            }
            Err(err) => fail(solver_status(&err), err.to_string()),
        }
    })
}

/// Runs the monotone iteration from `k Γ_0`. On `Ok`, `*out` receives the
/// converged profile; on `Diverged` or `Undetermined` it is set to NULL.
/// `iterations` may be NULL.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chq_solve(
    s: *const ChqSolver,
    k: f64,
    max_iter: usize,
    conv_tol: f64,
    out: *mut *mut ChqProfile,
    iterations: *mut usize,
) -> ChqStatus {
    guard(|| {
        if s.is_null() || out.is_null() {
            return fail(ChqStatus::NullPointer, "NULL argument");
        }
        // SAFETY: checked non-null.
        let s = unsafe { &*s };
        // SAFETY: checked non-null.
        unsafe { *out = ptr::null_mut() };
        let mut inst = ProblemInstance::new(s.exponents.clone(), k);
        inst.max_iter = max_iter;
        inst.conv_tol = conv_tol;
        let outcome = match solve_minimal(&inst, &s.ops, None) {
            Ok(o) => o,
            Err(err) => return fail(solver_status(&err), err.to_string()),
        };
        if !iterations.is_null() {
            // SAFETY: checked non-null.
            unsafe { *iterations = outcome.trace().records.len() };
        }
        match outcome {
            SolveOutcome::Converged { profile, .. } => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(ChqProfile(profile))) };
                ChqStatus::Ok
            }
            SolveOutcome::Diverged { iteration, sup_norm, .. } => fail(
                ChqStatus::Diverged,
                format!("iteration diverged at step {iteration} (sup norm {sup_norm:e})"),
            ),
            SolveOutcome::MaxIterations { .. } => {
                fail(ChqStatus::Undetermined, format!("no verdict within {max_iter} iterations"))
            }
        }
    })
}

/// Number of grid nodes of the profile (0 for NULL).
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chq_profile_len(p: *const ChqProfile) -> usize {
    if p.is_null() {
        0
    } else {
        // SAFETY: checked non-null.
        unsafe { (*p).0.values().len() }
    }
}

/// Copies radii and values into caller buffers of length `len`, which must
/// be at least [`chq_profile_len`].
///
/// # Safety
/// `p` must be a live handle; `r` and `u` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn chq_profile_copy(p: *const ChqProfile, r: *mut f64, u: *mut f64, len: usize) -> ChqStatus {
    guard(|| {
        if p.is_null() || r.is_null() || u.is_null() {
            return fail(ChqStatus::NullPointer, "NULL argument");
        }
        // SAFETY: checked non-null.
        let prof = unsafe { &(*p).0 };
        let m = prof.values().len();
        if len < m {
            return fail(ChqStatus::BufferTooSmall, format!("need {m} entries, got {len}"));
        }
        // SAFETY: caller guarantees `len >= m` writable doubles at each pointer.
        unsafe {
            ptr::copy_nonoverlapping(prof.grid().nodes().as_ptr(), r, m);
            ptr::copy_nonoverlapping(prof.values().as_ptr(), u, m);
        }
        ChqStatus::Ok
    })
}

/// # Safety
/// `p` must come from [`chq_solve`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn chq_profile_free(p: *mut ChqProfile) {
    if !p.is_null() {
        // SAFETY: allocated by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(p) });
    }
}

//! C ABI for the spa analyzer.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Every fallible call returns a
//! [`SpaStatus`] and, on failure, records a message readable with
//! [`spa_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spa::cli::{attack_spec, derive_spec};
use spa::report::{Report, Status};
use spa::speclang::{self, SpecFile};

/// Result of an API call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Query = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Answer carried by a report.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaAnswer {
    No = 0,
    Yes = 1,
    None = 2,
    Found = 3,
    Exhausted = 4,
    Failed = 5,
}

/// A parsed `.spa` file.
pub struct SpaSpec {
    spec: SpecFile,
}

/// The report of one query.
pub struct SpaReport {
    report: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: SpaStatus, msg: &str) -> SpaStatus {
    set_error(msg);
    status
}

/// Run `f`, turning panics into `SpaStatus::Panic`.
fn guarded(f: impl FnOnce() -> SpaStatus) -> SpaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(SpaStatus::Panic, &msg)
        }
    }
}

/// Borrow a C string as UTF-8. `Ok(None)` for a null pointer.
unsafe fn opt_str<'a>(s: *const c_char) -> Result<Option<&'a str>, SpaStatus> {
    if s.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(s).to_str().map(Some).map_err(|_| fail(SpaStatus::InvalidUtf8, "string is not valid UTF-8"))
}

fn into_c(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior nuls removed").into_raw()
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; empty if none failed.
#[no_mangle]
pub extern "C" fn spa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn spa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a specification from source text.
///
/// # Safety
/// `src` must be a valid nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spa_spec_parse(src: *const c_char, out: *mut *mut SpaSpec) -> SpaStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SpaStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let src = match opt_str(src) {
            Ok(Some(s)) => s,
            Ok(None) => return fail(SpaStatus::NullPointer, "src is null"),
            Err(e) => return e,
        };
        match speclang::parse(src) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(SpaSpec { spec }));
                SpaStatus::Ok
            }
            Err(e) => fail(SpaStatus::Parse, &e.to_string()),
        }
    })
}

/// # Safety
/// `spec` must come from [`spa_spec_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spa_spec_free(spec: *mut SpaSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Number of queries in the file; 0 for a null handle.
///
/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spa_spec_query_count(spec: *const SpaSpec) -> usize {
    spec.as_ref().map(|s| s.spec.queries.len()).unwrap_or(0)
}

/// Name of query `index`, as a string to release with [`spa_string_free`].
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spa_spec_query_name(spec: *const SpaSpec, index: usize, out: *mut *mut c_char) -> SpaStatus {
    guarded(|| {
        let (Some(spec), false) = (spec.as_ref(), out.is_null()) else {
            return fail(SpaStatus::NullPointer, "spec or out is null");
        };
        match spec.spec.queries.get(index) {
            Some(q) => {
                *out = into_c(q.name());
                SpaStatus::Ok
            }
            None => fail(SpaStatus::OutOfRange, &format!("query index {index} out of range")),
        }
    })
}

unsafe fn run_query(
    spec: *const SpaSpec,
    query: *const c_char,
    out: *mut *mut SpaReport,
    f: impl FnOnce(&SpecFile, Option<&str>) -> spa::cli::Outcome,
) -> SpaStatus {
    guarded(|| {
        let (Some(spec), false) = (spec.as_ref(), out.is_null()) else {
            return fail(SpaStatus::NullPointer, "spec or out is null");
        };
        *out = ptr::null_mut();
        let name = match opt_str(query) {
            Ok(n) => n,
            Err(e) => return e,
        };
        match f(&spec.spec, name) {
            Ok((report, _)) => {
                *out = Box::into_raw(Box::new(SpaReport { report }));
                SpaStatus::Ok
            }
            Err(e) => fail(SpaStatus::Query, &e.0),
        }
    })
}

/// Answer a derive query. A null `query` selects the only derive query.
///
/// # Safety
/// `spec` must be a live handle, `query` null or a nul-terminated string,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spa_derive(spec: *const SpaSpec, query: *const c_char, out: *mut *mut SpaReport) -> SpaStatus {
    run_query(spec, query, out, |s, q| derive_spec(s, None, q, None, false))
}

/// Search for an attack. `sessions == 0` uses the query's bound and
/// `budget_ms == 0` means no time limit.
///
/// # Safety
/// As for [`spa_derive`].
#[no_mangle]
pub unsafe extern "C" fn spa_attack(
    spec: *const SpaSpec,
    query: *const c_char,
    sessions: u32,
    budget_ms: u64,
    out: *mut *mut SpaReport,
) -> SpaStatus {
    let sessions = (sessions > 0).then_some(sessions as usize);
    let budget = (budget_ms > 0).then_some(budget_ms);
    run_query(spec, query, out, |s, q| attack_spec(s, None, q, sessions, budget, false))
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spa_report_answer(report: *const SpaReport) -> SpaAnswer {
    match report.as_ref().map(|r| r.report.status) {
        Some(Status::Yes) => SpaAnswer::Yes,
        Some(Status::No) => SpaAnswer::No,
        Some(Status::Found) => SpaAnswer::Found,
        Some(Status::None) => SpaAnswer::None,
        Some(Status::Exhausted) => SpaAnswer::Exhausted,
        _ => SpaAnswer::Failed,
    }
}

/// CLI exit code of the report: 0 answered, 1 error, 2 budget exhausted.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spa_report_exit_code(report: *const SpaReport) -> i32 {
    report.as_ref().map(|r| r.report.exit_code).unwrap_or(1)
}

/// The report as JSON, to release with [`spa_string_free`]. Null for a null
/// handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spa_report_json(report: *const SpaReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => into_c(&r.report.to_json()),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `report` must come from [`spa_derive`] or [`spa_attack`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn spa_report_free(report: *mut SpaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be a string returned by this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use serde_json::Value;
use spa_ffi::*;

fn example(name: &str) -> CString {
    let p = format!("{}/../core/examples/{name}", env!("CARGO_MANIFEST_DIR"));
    CString::new(std::fs::read_to_string(p).unwrap()).unwrap()
}

fn parse(src: &CString) -> *mut SpaSpec {
    let mut spec = ptr::null_mut();
    assert_eq!(unsafe { spa_spec_parse(src.as_ptr(), &mut spec) }, SpaStatus::Ok);
    assert!(!spec.is_null());
    spec
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(spa_last_error()) }.to_str().unwrap().to_string()
}

fn take_string(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { spa_string_free(s) };
    out
}

#[test]
fn attack_through_the_c_api() {
    let spec = parse(&example("example1.spa"));
    unsafe {
        assert_eq!(spa_spec_query_count(spec), 1);
        let mut name = ptr::null_mut();
        assert_eq!(spa_spec_query_name(spec, 0, &mut name), SpaStatus::Ok);
        assert_eq!(take_string(name), "secret_m");

        let mut report = ptr::null_mut();
        assert_eq!(spa_attack(spec, ptr::null(), 3, 0, &mut report), SpaStatus::Ok);
        assert_eq!(spa_report_answer(report), SpaAnswer::Found);
        assert_eq!(spa_report_exit_code(report), 0);
        let v: Value = serde_json::from_str(&take_string(spa_report_json(report))).unwrap();
        assert_eq!(v["command"], "attack");
        assert_eq!(v["status"], "found");
        spa_report_free(report);

        let goal = CString::new("secret_m").unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(spa_attack(spec, goal.as_ptr(), 1, 0, &mut report), SpaStatus::Ok);
        assert_eq!(spa_report_answer(report), SpaAnswer::None);
        spa_report_free(report);
        spa_spec_free(spec);
    }
}

#[test]
fn derive_through_the_c_api() {
    let spec = parse(&example("eqderiv.spa"));
    unsafe {
        for (goal, answer) in [("cipher_match", SpaAnswer::Yes), ("underivable_key", SpaAnswer::No)] {
            let g = CString::new(goal).unwrap();
            let mut report = ptr::null_mut();
            assert_eq!(spa_derive(spec, g.as_ptr(), &mut report), SpaStatus::Ok);
            assert_eq!(spa_report_answer(report), answer, "{goal}");
            spa_report_free(report);
        }
        spa_spec_free(spec);
    }
}

#[test]
fn json_matches_the_cli_library() {
    let spec = parse(&example("disje.spa"));
    let g = CString::new("disje").unwrap();
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(spa_derive(spec, g.as_ptr(), &mut a), SpaStatus::Ok);
        assert_eq!(spa_derive(spec, g.as_ptr(), &mut b), SpaStatus::Ok);
        assert_eq!(take_string(spa_report_json(a)), take_string(spa_report_json(b)));
        spa_report_free(a);
        spa_report_free(b);
        spa_spec_free(spec);
    }
}

#[test]
fn budget_exhaustion_is_reported() {
    let spec = parse(&example("example1.spa"));
    let mut report = ptr::null_mut();
    unsafe {
        // 1 ms is far below what three sessions need in practice.
        assert_eq!(spa_attack(spec, ptr::null(), 3, 1, &mut report), SpaStatus::Ok);
        let ans = spa_report_answer(report);
        assert!(matches!(ans, SpaAnswer::Exhausted | SpaAnswer::Found), "{ans:?}");
        if ans == SpaAnswer::Exhausted {
            assert_eq!(spa_report_exit_code(report), 2);
        }
        spa_report_free(report);
        spa_spec_free(spec);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut spec = ptr::null_mut();
        let bad = CString::new("names m;\nderive q { know m; goal m ~ ; }\n").unwrap();
        assert_eq!(spa_spec_parse(bad.as_ptr(), &mut spec), SpaStatus::Parse);
        assert!(spec.is_null());
        assert!(last_error().starts_with("2:"), "{}", last_error());

        assert_eq!(spa_spec_parse(ptr::null(), &mut spec), SpaStatus::NullPointer);
        let src = example("example1.spa");
        assert_eq!(spa_spec_parse(src.as_ptr(), ptr::null_mut()), SpaStatus::NullPointer);

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(spa_spec_parse(invalid.as_ptr().cast(), &mut spec), SpaStatus::InvalidUtf8);

        let spec = parse(&src);
        let mut name = ptr::null_mut();
        assert_eq!(spa_spec_query_name(spec, 7, &mut name), SpaStatus::OutOfRange);
        let nope = CString::new("nope").unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(spa_attack(spec, nope.as_ptr(), 0, 0, &mut report), SpaStatus::Query);
        assert!(report.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(spa_derive(spec, ptr::null(), &mut report), SpaStatus::Query);
        spa_spec_free(spec);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        assert_eq!(spa_spec_query_count(ptr::null()), 0);
        assert_eq!(spa_report_answer(ptr::null()), SpaAnswer::Failed);
        assert_eq!(spa_report_exit_code(ptr::null()), 1);
        assert!(spa_report_json(ptr::null()).is_null());
        spa_spec_free(ptr::null_mut());
        spa_report_free(ptr::null_mut());
        spa_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(spa_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/spa.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["spa_spec_parse", "spa_attack", "spa_derive", "spa_report_json", "spa_last_error", "SPA_STATUS_OK"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(o) = Command::new(cc).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang]).arg(&header).output() else {
            eprintln!("{cc} not available, skipping");
            continue;
        };
        assert!(o.status.success(), "{cc}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

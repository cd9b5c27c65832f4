use std::ffi::{CStr, CString};
use std::ptr;

use rfix_ffi::*;

const EXAMPLE: &str = include_str!("../../core/tests/data/example.json");

fn problem() -> *mut RfixProblem {
    let json = CString::new(EXAMPLE).unwrap();
    let mut p = ptr::null_mut();
    let st = unsafe { rfix_problem_from_json(json.as_ptr(), &mut p) };
    assert_eq!(st, RfixStatus::Ok, "{}", last_error());
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rfix_last_error()) }
        .to_string_lossy()
        .into_owned()
}

const X: [f64; 3] = [1.0, 0.8213, 0.0];
const Y: [f64; 3] = [20.0270, 18.3422, 18.4318];

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(rfix_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn orders_and_sample_count() {
    let p = problem();
    let (mut n, mut m, mut count) = (0, 0, 0);
    unsafe {
        assert_eq!(rfix_problem_orders(p, &mut n, &mut m), RfixStatus::Ok);
        assert_eq!(rfix_problem_sample_count(p, &mut count), RfixStatus::Ok);
        rfix_problem_free(p);
    }
    assert_eq!((n, m, count), (2, 2, 1016));
}

#[test]
fn synthesize_round_trip() {
    let p = problem();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(rfix_synthesize(p, &mut r), RfixStatus::Ok, "{}", last_error());
        assert_eq!(rfix_result_status(r), RfixStatus::Ok);
        let mut margin = f64::NAN;
        assert_eq!(rfix_result_margin(r, &mut margin), RfixStatus::Ok);
        assert!(margin > 0.0);

        let (mut x, mut y, mut len) = ([0.0; 3], [0.0; 3], 0);
        assert_eq!(
            rfix_result_controller(r, x.as_mut_ptr(), y.as_mut_ptr(), 1, &mut len),
            RfixStatus::BufferTooSmall
        );
        assert_eq!(len, 3);
        assert_eq!(
            rfix_result_controller(r, x.as_mut_ptr(), y.as_mut_ptr(), 3, &mut len),
            RfixStatus::Ok
        );
        assert_eq!(x[0], 1.0);
        assert_eq!(x[2].to_bits(), 0f64.to_bits());

        let mut stable = false;
        let (a, b) = ([0.7863, 0.4128], [0.6132, 1.4309]);
        let st = rfix_closed_loop_stable(p, x.as_ptr(), y.as_ptr(), 3, a.as_ptr(), b.as_ptr(), 2, &mut stable);
        assert_eq!(st, RfixStatus::Ok);
        assert!(stable);

        let mut s = ptr::null_mut();
        assert_eq!(rfix_result_json(r, &mut s), RfixStatus::Ok);
        let doc: serde_json::Value = serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
        assert_eq!(doc["status"], "feasible");
        assert_eq!(doc["certificates"][0]["report"]["lmis"].as_array().unwrap().len(), 5);
        rfix_string_free(s);
        rfix_result_free(r);
        rfix_problem_free(p);
    }
}

#[test]
fn check_reference_and_destabilizing() {
    let p = problem();
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(
            rfix_check_controller(p, X.as_ptr(), Y.as_ptr(), 3, &mut r),
            RfixStatus::Ok
        );
        rfix_result_free(r);

        let bad: Vec<f64> = Y.iter().map(|v| -100.0 * v).collect();
        let mut r = ptr::null_mut();
        assert_eq!(
            rfix_check_controller(p, X.as_ptr(), bad.as_ptr(), 3, &mut r),
            RfixStatus::Infeasible
        );
        assert!(!r.is_null());
        assert!(!last_error().is_empty());
        let (mut x, mut y, mut len) = ([0.0; 3], [0.0; 3], 0);
        // check results carry the controller that was audited
        assert_eq!(
            rfix_result_controller(r, x.as_mut_ptr(), y.as_mut_ptr(), 3, &mut len),
            RfixStatus::Ok
        );
        rfix_result_free(r);

        let mut stable = true;
        let (a, b) = ([1.0, 1.0], [1.0, 1.5]);
        assert_eq!(
            rfix_closed_loop_stable(p, X.as_ptr(), bad.as_ptr(), 3, a.as_ptr(), b.as_ptr(), 2, &mut stable),
            RfixStatus::Ok
        );
        assert!(!stable);
        rfix_problem_free(p);
    }
}

#[test]
fn step_response_buffers() {
    let p = problem();
    let (a, b) = ([0.7863, 0.4128], [0.6132, 1.4309]);
    let mut written = 0;
    unsafe {
        let st = rfix_step_response(
            p,
            X.as_ptr(),
            Y.as_ptr(),
            3,
            a.as_ptr(),
            b.as_ptr(),
            2,
            30.0,
            0.01,
            ptr::null_mut(),
            ptr::null_mut(),
            0,
            &mut written,
        );
        assert_eq!(st, RfixStatus::BufferTooSmall);
        let mut t = vec![0.0; written];
        let mut y = vec![0.0; written];
        let st = rfix_step_response(
            p,
            X.as_ptr(),
            Y.as_ptr(),
            3,
            a.as_ptr(),
            b.as_ptr(),
            2,
            30.0,
            0.01,
            t.as_mut_ptr(),
            y.as_mut_ptr(),
            written,
            &mut written,
        );
        assert_eq!(st, RfixStatus::Ok);
        assert!((y[written - 1] - 1.0).abs() < 1e-3);
        assert!((t[written - 1] - 30.0).abs() < 1e-9);
        rfix_problem_free(p);
    }
}

#[test]
fn bad_inputs_report_errors() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(rfix_problem_from_json(ptr::null(), &mut p), RfixStatus::NullPointer);
        let bad = CString::new(EXAMPLE.replace("[0.5, 1.0], [-1.0, 1.0]", "[1.0, 0.5], [-1.0, 1.0]")).unwrap();
        assert_eq!(rfix_problem_from_json(bad.as_ptr(), &mut p), RfixStatus::InvalidInput);
        assert!(p.is_null());
        assert!(last_error().contains("a_bounds"), "{}", last_error());
        let junk = CString::new("{not json").unwrap();
        assert_eq!(rfix_problem_from_json(junk.as_ptr(), &mut p), RfixStatus::InvalidInput);

        let mut r = ptr::null_mut();
        assert_eq!(rfix_synthesize(ptr::null(), &mut r), RfixStatus::NullPointer);
        assert_eq!(rfix_result_status(ptr::null()), RfixStatus::NullPointer);

        let p = problem();
        let nonmonic = [2.0, 0.8, 0.0];
        assert_eq!(
            rfix_check_controller(p, nonmonic.as_ptr(), Y.as_ptr(), 3, &mut r),
            RfixStatus::InvalidInput
        );
        let (a, b) = ([5.0, 0.0], [0.75, 1.25]);
        let mut stable = false;
        assert_eq!(
            rfix_closed_loop_stable(p, X.as_ptr(), Y.as_ptr(), 3, a.as_ptr(), b.as_ptr(), 2, &mut stable),
            RfixStatus::InvalidInput
        );
        rfix_problem_free(p);
        rfix_problem_free(ptr::null_mut());
        rfix_result_free(ptr::null_mut());
        rfix_string_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/rfix.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

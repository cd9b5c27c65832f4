//! C ABI over `rfix-core`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every entry point returns an [`RfixStatus`];
//! on anything but `RFIX_STATUS_OK` a message is available from
//! [`rfix_last_error`] on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rfix_core::cli::{ProblemFile, RangeOverrides};
use rfix_core::poly::Controller;
use rfix_core::sdp::SdpStatus;
use rfix_core::synth::{self, SynthesisResult, SynthesisSpec};
use rfix_core::verify::{self, UncertaintySample};
use rfix_core::Error;

/// Return codes. The numeric values match the `rfix` CLI exit codes where
/// the meanings overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfixStatus {
    Ok = 0,
    InvalidInput = 1,
    Infeasible = 2,
    NumericalFailure = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Unstable = 6,
    Panic = 7,
}

/// Parsed problem file.
pub struct RfixProblem {
    file: ProblemFile,
    spec: SynthesisSpec,
}

/// Outcome of a synthesis or controller check.
pub struct RfixResult {
    inner: SynthesisResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> RfixStatus {
    match err {
        Error::Unstable(_) => RfixStatus::Unstable,
        Error::Solver(_) => RfixStatus::NumericalFailure,
        _ => RfixStatus::InvalidInput,
    }
}

fn sdp_status(s: SdpStatus) -> RfixStatus {
    match s {
        SdpStatus::Feasible => RfixStatus::Ok,
        SdpStatus::Infeasible => RfixStatus::Infeasible,
        SdpStatus::NumericalFailure => RfixStatus::NumericalFailure,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<RfixStatus, (RfixStatus, String)>) -> RfixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RfixStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (RfixStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RfixStatus, String) {
    (RfixStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (RfixStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn problem_ref<'a>(p: *const RfixProblem) -> Result<&'a RfixProblem, (RfixStatus, String)> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn result_ref<'a>(r: *const RfixResult) -> Result<&'a RfixResult, (RfixStatus, String)> {
    r.as_ref().ok_or_else(|| null("result"))
}

/// `x` is `[1, x_1, ..., x_m]`, `y` is `[y_0, ..., y_m]`, both of length `len`.
unsafe fn controller(x: *const f64, y: *const f64, len: usize) -> Result<Controller, (RfixStatus, String)> {
    let x = slice(x, len, "x")?.to_vec();
    let y = slice(y, len, "y")?.to_vec();
    Controller::new(x, y).map_err(core_err)
}

/// Plant sample from concrete coefficients `a_1..a_n`, `b_1..b_n`.
unsafe fn plant_sample(
    problem: &RfixProblem,
    a: *const f64,
    b: *const f64,
    n: usize,
) -> Result<UncertaintySample, (RfixStatus, String)> {
    let plant = &problem.spec.plant;
    if n != plant.order() {
        return Err((
            RfixStatus::InvalidInput,
            format!("plant order is {}, got {n} coefficients", plant.order()),
        ));
    }
    let (da, db) = plant
        .deltas_for(slice(a, n, "a")?, slice(b, n, "b")?)
        .map_err(core_err)?;
    let mut s = UncertaintySample::nominal(n);
    s.delta_a = da;
    s.delta_b = db;
    Ok(s)
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rfix_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failing call on this thread. Valid until the next
/// call into the library from the same thread.
#[no_mangle]
pub extern "C" fn rfix_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses and validates a problem document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_problem_from_json(json: *const c_char, out: *mut *mut RfixProblem) -> RfixStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (RfixStatus::InvalidInput, format!("json is not UTF-8: {e}")))?;
        let file = ProblemFile::from_json(text).map_err(core_err)?;
        let spec = file.synthesis_spec(&RangeOverrides::default()).map_err(core_err)?;
        *out = Box::into_raw(Box::new(RfixProblem { file, spec }));
        Ok(RfixStatus::Ok)
    })
}

/// # Safety
/// `problem` must come from [`rfix_problem_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rfix_problem_free(problem: *mut RfixProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Plant order `n` and controller order `m` of a problem.
///
/// # Safety
/// `problem` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_problem_orders(
    problem: *const RfixProblem,
    plant_order: *mut usize,
    controller_order: *mut usize,
) -> RfixStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if plant_order.is_null() || controller_order.is_null() {
            return Err(null("out"));
        }
        *plant_order = p.spec.plant.order();
        *controller_order = p.spec.order;
        Ok(RfixStatus::Ok)
    })
}

fn finish(result: SynthesisResult, out: *mut *mut RfixResult) -> RfixStatus {
    let status = sdp_status(result.status);
    if status != RfixStatus::Ok {
        set_error(result.message.clone());
    }
    // SAFETY: `out` checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(RfixResult { inner: result })) };
    status
}

/// Synthesizes a controller. A result handle is produced for every solver
/// outcome, including infeasible ones; the return value mirrors its status.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_synthesize(problem: *const RfixProblem, out: *mut *mut RfixResult) -> RfixStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let r = synth::synthesize(&p.spec).map_err(core_err)?;
        Ok(finish(r, out))
    })
}

/// Certifies a fixed controller, one SDP per LMI group.
///
/// # Safety
/// `x` and `y` must point to `len` doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_check_controller(
    problem: *const RfixProblem,
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut *mut RfixResult,
) -> RfixStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let ctrl = controller(x, y, len)?;
        let r = synth::check_controller(&p.spec, &ctrl).map_err(core_err)?;
        Ok(finish(r, out))
    })
}

/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn rfix_result_free(result: *mut RfixResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Status of a result: `RFIX_STATUS_OK`, `RFIX_STATUS_INFEASIBLE` or `RFIX_STATUS_NUMERICAL_FAILURE`.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfix_result_status(result: *const RfixResult) -> RfixStatus {
    guard(|| Ok(sdp_status(result_ref(result)?.inner.status)))
}

/// Smallest verified margin over the result's certificates.
///
/// # Safety
/// `result` must be a live handle; `margin` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_result_margin(result: *const RfixResult, margin: *mut f64) -> RfixStatus {
    guard(|| {
        let r = result_ref(result)?;
        if margin.is_null() {
            return Err(null("margin"));
        }
        *margin = r.inner.margin();
        Ok(RfixStatus::Ok)
    })
}

/// Copies the controller into `x` and `y`, each of capacity `cap`. On
/// return `*len` holds `m + 1`; `RFIX_STATUS_BUFFER_TOO_SMALL` if `cap` is short.
///
/// # Safety
/// `x` and `y` must be writable for `cap` doubles; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_result_controller(
    result: *const RfixResult,
    x: *mut f64,
    y: *mut f64,
    cap: usize,
    len: *mut usize,
) -> RfixStatus {
    guard(|| {
        let r = result_ref(result)?;
        if len.is_null() {
            return Err(null("len"));
        }
        let ctrl = r
            .inner
            .controller
            .as_ref()
            .ok_or_else(|| (RfixStatus::Infeasible, "result holds no controller".to_string()))?;
        let n = ctrl.x.len();
        *len = n;
        if cap < n {
            return Err((RfixStatus::BufferTooSmall, format!("need {n} entries, have {cap}")));
        }
        if x.is_null() || y.is_null() {
            return Err(null("x/y"));
        }
        ptr::copy_nonoverlapping(ctrl.x.as_ptr(), x, n);
        ptr::copy_nonoverlapping(ctrl.y.as_ptr(), y, n);
        Ok(RfixStatus::Ok)
    })
}

/// Certificates and solver statistics as a JSON string; release with
/// [`rfix_string_free`].
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_result_json(result: *const RfixResult, out: *mut *mut c_char) -> RfixStatus {
    guard(|| {
        let r = &result_ref(result)?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let certs: Vec<_> = r
            .certificates
            .iter()
            .map(|c| {
                serde_json::json!({
                    "groups": c.label(),
                    "status": c.outcome.status,
                    "margin": c.outcome.achieved_margin,
                    "report": c.outcome.report,
                    "blocks": c.blocks(),
                })
            })
            .collect();
        let doc = serde_json::json!({
            "status": r.status,
            "message": r.message,
            "controller": r.controller.as_ref().map(|c| serde_json::json!({"x": c.x, "y": c.y})),
            "certificates": certs,
            "triage": r.triage,
        });
        let s = CString::new(doc.to_string()).map_err(|e| (RfixStatus::InvalidInput, e.to_string()))?;
        *out = s.into_raw();
        Ok(RfixStatus::Ok)
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn rfix_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Closed-loop stability of `(a, b)` under the controller `(x, y)`, where
/// `a`, `b` hold `a_1..a_n`, `b_1..b_n` and must lie inside the intervals.
///
/// # Safety
/// Array arguments must point to the stated number of doubles; `stable`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_closed_loop_stable(
    problem: *const RfixProblem,
    x: *const f64,
    y: *const f64,
    len: usize,
    a: *const f64,
    b: *const f64,
    n: usize,
    stable: *mut bool,
) -> RfixStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if stable.is_null() {
            return Err(null("stable"));
        }
        let ctrl = controller(x, y, len)?;
        let s = plant_sample(p, a, b, n)?;
        *stable = verify::closed_loop_stable(&p.spec.plant, &ctrl, &s);
        Ok(RfixStatus::Ok)
    })
}

/// Unit-step response at one plant sample, written to `t_out` / `y_out`
/// (capacity `cap`). `*written` receives the number of points; with
/// `RFIX_STATUS_BUFFER_TOO_SMALL` it holds the required capacity.
///
/// # Safety
/// Array arguments must point to the stated number of doubles; `t_out`
/// and `y_out` must be writable for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn rfix_step_response(
    problem: *const RfixProblem,
    x: *const f64,
    y: *const f64,
    len: usize,
    a: *const f64,
    b: *const f64,
    n: usize,
    t_end: f64,
    dt: f64,
    t_out: *mut f64,
    y_out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> RfixStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if written.is_null() {
            return Err(null("written"));
        }
        let ctrl = controller(x, y, len)?;
        let s = plant_sample(p, a, b, n)?;
        let trace = verify::step_response(&p.spec.plant, &ctrl, &s, t_end, dt).map_err(core_err)?;
        let k = trace.t.len();
        *written = k;
        if cap < k {
            return Err((RfixStatus::BufferTooSmall, format!("need {k} points, have {cap}")));
        }
        if t_out.is_null() || y_out.is_null() {
            return Err(null("t_out/y_out"));
        }
        ptr::copy_nonoverlapping(trace.t.as_ptr(), t_out, k);
        ptr::copy_nonoverlapping(trace.y.as_ptr(), y_out, k);
        Ok(RfixStatus::Ok)
    })
}

/// Number of sampling-plan points (vertices plus seeded interior samples)
/// configured by the problem file.
///
/// # Safety
/// `problem` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfix_problem_sample_count(problem: *const RfixProblem, count: *mut usize) -> RfixStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if count.is_null() {
            return Err(null("count"));
        }
        *count = (1usize << (2 * p.spec.plant.order())) + p.file.verify.samples;
        Ok(RfixStatus::Ok)
    })
}

//! C ABI for the bsdesign library.
//!
//! Every fallible function returns a [`BsdStatus`] and writes its result
//! through an out pointer. On failure a message is kept per thread and can be
//! read with [`bsd_last_error_message`]. Search sessions are opaque handles
//! created by `bsd_session_new` / `bsd_session_from_json` and released with
//! `bsd_session_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bsdesign::cost::{predict_stage_size, total_cost, CostFitCoeffs};
use bsdesign::likelihood::{fit_mle, FitOptions};
use bsdesign::nonexistence::prob_no_mle;
use bsdesign::response_models::{cdf, d_optimal_canonical, pdf, quantile};
use bsdesign::search::{Limits, Method, Phase, ProbeSubset, SearchState};
use bsdesign::{Error, ModelKind};

pub const BSD_MODEL_LOGIT: u32 = 0;
pub const BSD_MODEL_PROBIT: u32 = 1;
pub const BSD_MODEL_CLOGLOG: u32 = 2;

/// Estimation method I: all cumulated data.
pub const BSD_METHOD_ALL: u32 = 1;
/// Estimation method II: endpoints, anchor and final probe.
pub const BSD_METHOD_SELECTED: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsdStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Precondition = 3,
    NumericalFailure = 4,
    InvalidInterval = 5,
    DegenerateResponse = 6,
    Oracle = 7,
    Serialization = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsdPhase {
    EndpointCheck = 0,
    Bisection = 1,
    Probing = 2,
    Done = 3,
    Failed = 4,
}

impl From<Phase> for BsdPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::EndpointCheck => BsdPhase::EndpointCheck,
            Phase::Bisection => BsdPhase::Bisection,
            Phase::Probing => BsdPhase::Probing,
            Phase::Done => BsdPhase::Done,
            Phase::Failed => BsdPhase::Failed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BsdDesignPoints {
    pub z1: f64,
    pub z2: f64,
    pub p1: f64,
    pub p2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BsdFit {
    pub a: f64,
    pub b: f64,
    pub se_a: f64,
    pub se_b: f64,
    pub log_likelihood: f64,
    pub converged: bool,
}

/// Opaque search session.
pub struct BsdSession {
    state: SearchState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BsdStatus {
    match e {
        Error::InvalidArgument(_) => BsdStatus::InvalidArgument,
        Error::Precondition(_) => BsdStatus::Precondition,
        Error::NumericalFailure(_) => BsdStatus::NumericalFailure,
        Error::InvalidInterval(_) => BsdStatus::InvalidInterval,
        Error::DegenerateResponse(_) => BsdStatus::DegenerateResponse,
        Error::Oracle(_) => BsdStatus::Oracle,
        Error::Json(_) | Error::Csv(_) => BsdStatus::Serialization,
        Error::Io(_) => BsdStatus::Io,
    }
}

struct Fail(BsdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(BsdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BsdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BsdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BsdStatus::Panic
        }
    }
}

fn model(code: u32) -> Result<ModelKind, Fail> {
    match code {
        BSD_MODEL_LOGIT => Ok(ModelKind::Logit),
        BSD_MODEL_PROBIT => Ok(ModelKind::Probit),
        BSD_MODEL_CLOGLOG => Ok(ModelKind::Cloglog),
        _ => Err(Fail(BsdStatus::InvalidArgument, format!("unknown model code {code}"))),
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn session<'a>(s: *const BsdSession) -> Result<&'a BsdSession, Fail> {
    s.as_ref().ok_or_else(|| null("session"))
}

unsafe fn session_mut<'a>(s: *mut BsdSession) -> Result<&'a mut BsdSession, Fail> {
    s.as_mut().ok_or_else(|| null("session"))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bsd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_cdf(model_code: u32, eta: f64, out: *mut f64) -> BsdStatus {
    guard(|| write(out, cdf(model(model_code)?, eta)?, "out"))
}

/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_pdf(model_code: u32, eta: f64, out: *mut f64) -> BsdStatus {
    guard(|| write(out, pdf(model(model_code)?, eta)?, "out"))
}

/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_quantile(model_code: u32, p: f64, out: *mut f64) -> BsdStatus {
    guard(|| write(out, quantile(model(model_code)?, p)?, "out"))
}

/// Canonical D-optimal levels and their response probabilities.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_d_optimal(model_code: u32, out: *mut BsdDesignPoints) -> BsdStatus {
    guard(|| {
        let p = d_optimal_canonical(model(model_code)?)?;
        write(out, BsdDesignPoints { z1: p.z1, z2: p.z2, p1: p.p1, p2: p.p2 }, "out")
    })
}

/// Probability that no MLE exists with `n` (even) measurements split over the
/// D-optimal levels.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_prob_no_mle(model_code: u32, n: u64, out: *mut f64) -> BsdStatus {
    guard(|| write(out, prob_no_mle(model(model_code)?, n)?, "out"))
}

/// Stage size from the published cost model for interval length `d` and
/// stage cost `stage_cost`.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_predict_stage_size(
    model_code: u32,
    d: f64,
    stage_cost: f64,
    out: *mut u64,
) -> BsdStatus {
    guard(|| {
        let coeffs = CostFitCoeffs::published(model(model_code)?);
        write(out, predict_stage_size(&coeffs, d, stage_cost)?, "out")
    })
}

#[no_mangle]
pub extern "C" fn bsd_total_cost(stages: f64, stage_size: f64, stage_cost: f64) -> f64 {
    total_cost(stages, stage_size, stage_cost)
}

/// Starts a search on `[x_min, x_max]` with default limits.
///
/// # Safety
/// `out` must be NULL or valid for writes. The session written there must be
/// released with `bsd_session_free`.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_new(
    x_min: f64,
    x_max: f64,
    stage_size: u64,
    tie_seed: u64,
    out: *mut *mut BsdSession,
) -> BsdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let state = SearchState::new(x_min, x_max, stage_size, Limits::default(), tie_seed)?;
        out.write(Box::into_raw(Box::new(BsdSession { state })));
        Ok(())
    })
}

/// Restores a session from a JSON snapshot.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out` must be NULL or valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_from_json(json: *const c_char, out: *mut *mut BsdSession) -> BsdStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(BsdStatus::Serialization, format!("snapshot is not UTF-8: {e}")))?;
        let state = SearchState::from_json(text)?;
        out.write(Box::into_raw(Box::new(BsdSession { state })));
        Ok(())
    })
}

/// Serializes the session. Free the string with `bsd_string_free`.
///
/// # Safety
/// `session` must be NULL or a live session; `out` must be NULL or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_to_json(session_ptr: *const BsdSession, out: *mut *mut c_char) -> BsdStatus {
    guard(|| {
        let s = session(session_ptr)?;
        let json = s.state.to_json()?;
        let c = CString::new(json).map_err(|e| Fail(BsdStatus::Serialization, e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bsd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Level at which the next stage must be measured.
///
/// # Safety
/// `session` must be NULL or a live session; `out` must be NULL or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_next_level(session_ptr: *const BsdSession, out: *mut f64) -> BsdStatus {
    guard(|| write(out, session(session_ptr)?.state.next_level()?, "out"))
}

/// Records `successes` out of the stage size at the current level. `phase_out`
/// may be NULL.
///
/// # Safety
/// `session` must be NULL or a live session; `phase_out` must be NULL or valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_apply_response(
    session_ptr: *mut BsdSession,
    successes: u64,
    phase_out: *mut BsdPhase,
) -> BsdStatus {
    guard(|| {
        let s = session_mut(session_ptr)?;
        let phase = s.state.apply_response(successes)?;
        if !phase_out.is_null() {
            phase_out.write(phase.into());
        }
        Ok(())
    })
}

/// Current phase; a NULL session reports `Failed`.
///
/// # Safety
/// `session` must be NULL or a live session.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_phase(session_ptr: *const BsdSession) -> BsdPhase {
    session_ptr.as_ref().map_or(BsdPhase::Failed, |s| s.state.phase.into())
}

/// Number of completed stages; 0 for a NULL session.
///
/// # Safety
/// `session` must be NULL or a live session.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_stage_count(session_ptr: *const BsdSession) -> u64 {
    session_ptr.as_ref().map_or(0, |s| s.state.stages() as u64)
}

/// Diagnostic of a failed session, or NULL. Free with `bsd_string_free`.
///
/// # Safety
/// `session` must be NULL or a live session.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_failure(session_ptr: *const BsdSession) -> *mut c_char {
    session_ptr
        .as_ref()
        .and_then(|s| s.state.failure.as_ref())
        .and_then(|f| CString::new(f.message.clone()).ok())
        .map_or(ptr::null_mut(), CString::into_raw)
}

/// Fits the model on a finished search with `BSD_METHOD_ALL` or
/// `BSD_METHOD_SELECTED`.
///
/// # Safety
/// `session` must be NULL or a live session; `out` must be NULL or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_fit(
    session_ptr: *const BsdSession,
    model_code: u32,
    method: u32,
    out: *mut BsdFit,
) -> BsdStatus {
    guard(|| {
        let s = session(session_ptr)?;
        let method = match method {
            BSD_METHOD_ALL => Method::I,
            BSD_METHOD_SELECTED => Method::II,
            m => return Err(Fail(BsdStatus::InvalidArgument, format!("unknown method {m}"))),
        };
        let data = s.state.select_data(method, ProbeSubset::FinalProbe)?;
        let fit = fit_mle(model(model_code)?, &data, &FitOptions::default())?;
        write(
            out,
            BsdFit {
                a: fit.a_hat,
                b: fit.b_hat,
                se_a: fit.se_a,
                se_b: fit.se_b,
                log_likelihood: fit.log_likelihood,
                converged: fit.converged,
            },
            "out",
        )
    })
}

/// # Safety
/// `session` must be NULL or a session from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bsd_session_free(session_ptr: *mut BsdSession) {
    if !session_ptr.is_null() {
        drop(Box::from_raw(session_ptr));
    }
}

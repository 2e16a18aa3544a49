//! C interface to `shadowspec`.
//!
//! Operators live behind an opaque handle created from the same JSON the
//! command-line tool reads. Every call returns a [`ShadowspecStatus`]; on
//! failure `shadowspec_last_error` describes the problem. Strings handed out
//! by the library must be released with `shadowspec_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use shadowspec::cli::{self, Command, RunConfig};
use shadowspec::error::Error;
use shadowspec::operators::{Operator, SupportedVector, Vector};
use shadowspec::projector::{self, ContourConfig};
use shadowspec::{shadowing, spectral, C64};

/// Status codes. The numeric values of the first four match the exit codes
/// of the command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShadowspecStatus {
    Ok = 0,
    InputError = 2,
    NumericalFailure = 3,
    CertificateFailure = 4,
    NullPointer = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Opaque operator handle.
pub struct ShadowspecOperator {
    op: Operator,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowspecVerdicts {
    pub hyperbolic: bool,
    pub uniformly_expansive: bool,
    pub shadowing: bool,
    /// Distance of the spectrum to the unit circle.
    pub gap_sigma: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> ShadowspecStatus {
    match err.exit_code() {
        2 => ShadowspecStatus::InputError,
        3 => ShadowspecStatus::NumericalFailure,
        4 => ShadowspecStatus::CertificateFailure,
        _ => ShadowspecStatus::InputError,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), ShadowspecStatus>) -> ShadowspecStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShadowspecStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            ShadowspecStatus::Panic
        }
    }
}

fn fail(err: Error) -> ShadowspecStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null(what: &str) -> ShadowspecStatus {
    set_error(&format!("{what} is null"));
    ShadowspecStatus::NullPointer
}

unsafe fn handle<'a>(op: *const ShadowspecOperator) -> Result<&'a Operator, ShadowspecStatus> {
    op.as_ref().map(|h| &h.op).ok_or_else(|| null("operator"))
}

fn hand_out(text: String, out: *mut *mut c_char) -> Result<(), ShadowspecStatus> {
    let c = CString::new(text).map_err(|_| {
        set_error("report contains a nul byte");
        ShadowspecStatus::Panic
    })?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn shadowspec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses an operator from JSON.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_operator_from_json(
    json: *const c_char,
    out: *mut *mut ShadowspecOperator,
) -> ShadowspecStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| {
            set_error("json is not valid UTF-8");
            ShadowspecStatus::InputError
        })?;
        let op = Operator::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(ShadowspecOperator { op }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `op` must come from `shadowspec_operator_from_json` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_operator_free(op: *mut ShadowspecOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Dimension of a dense operator, or 0 for a shift.
///
/// # Safety
/// `op` must be a live handle and `out_dim` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_operator_dim(
    op: *const ShadowspecOperator,
    out_dim: *mut usize,
) -> ShadowspecStatus {
    guard(|| {
        let op = handle(op)?;
        if out_dim.is_null() {
            return Err(null("out_dim"));
        }
        *out_dim = match op {
            Operator::Dense(a) => a.dim(),
            Operator::Shift(_) => 0,
        };
        Ok(())
    })
}

/// Hyperbolicity, uniform expansivity and shadowing verdicts.
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_classify(
    op: *const ShadowspecOperator,
    tol: f64,
    out: *mut ShadowspecVerdicts,
) -> ShadowspecStatus {
    guard(|| {
        let op = handle(op)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = match op {
            Operator::Dense(a) => spectral::classify_dense(a, tol),
            Operator::Shift(s) => spectral::classify_shift(s, tol),
        }
        .map_err(fail)?;
        *out = ShadowspecVerdicts {
            hyperbolic: report.verdicts.hyperbolic,
            uniformly_expansive: report.verdicts.uniformly_expansive,
            shadowing: report.verdicts.shadowing,
            gap_sigma: report.gap_sigma,
        };
        Ok(())
    })
}

/// Full analysis report as JSON, as written by `shadowspec analyze`.
///
/// # Safety
/// `op` must be a live handle and `out_json` a valid pointer. The string
/// must be released with `shadowspec_string_free`.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_analyze_json(
    op: *const ShadowspecOperator,
    tol: f64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> ShadowspecStatus {
    guard(|| {
        let op = handle(op)?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let mut cfg = RunConfig::new(Command::Analyze);
        cfg.tol = tol;
        cfg.seed = seed;
        cfg.validate_ranges().map_err(fail)?;
        let doc = cli::analyze_operator(op, &cfg).map_err(fail)?;
        hand_out(
            serde_json::to_string_pretty(&doc).expect("report serializes"),
            out_json,
        )
    })
}

/// Shadowing experiment on `-window..=window` as JSON, as written by
/// `shadowspec shadow`.
///
/// # Safety
/// `op` must be a live handle and `out_json` a valid pointer. The string
/// must be released with `shadowspec_string_free`.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_shadow_json(
    op: *const ShadowspecOperator,
    delta: f64,
    window: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> ShadowspecStatus {
    guard(|| {
        let op = handle(op)?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let mut cfg = RunConfig::new(Command::Shadow);
        cfg.delta = delta;
        cfg.window = Some(window);
        cfg.seed = seed;
        cfg.validate_ranges().map_err(fail)?;
        let doc = cli::shadow_operator(op, &cfg).map_err(fail)?;
        hand_out(
            serde_json::to_string_pretty(&doc).expect("report serializes"),
            out_json,
        )
    })
}

/// Riesz projector of a dense operator on the circle of radius 1 with
/// `nodes` quadrature nodes, written row-major as interleaved
/// `(re, im)` pairs. `out_len` must be at least `2 * dim * dim`.
///
/// # Safety
/// `op` must be a live handle and `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_riesz_projector(
    op: *const ShadowspecOperator,
    nodes: usize,
    out: *mut f64,
    out_len: usize,
) -> ShadowspecStatus {
    guard(|| {
        let a = match handle(op)? {
            Operator::Dense(a) => a,
            Operator::Shift(_) => {
                return Err(fail(Error::KindMismatch(
                    "the projector needs a dense operator".into(),
                )))
            }
        };
        if out.is_null() {
            return Err(null("out"));
        }
        let needed = 2 * a.dim() * a.dim();
        if out_len < needed {
            set_error(&format!("buffer holds {out_len} doubles, {needed} needed"));
            return Err(ShadowspecStatus::BufferTooSmall);
        }
        let cfg = ContourConfig::new(1.0, nodes).map_err(fail)?;
        let b = projector::riesz_projector(a, &cfg).map_err(fail)?;
        let buf = std::slice::from_raw_parts_mut(out, needed);
        for (i, z) in b.matrix().as_slice().iter().enumerate() {
            buf[2 * i] = z.re;
            buf[2 * i + 1] = z.im;
        }
        Ok(())
    })
}

/// Test-sequence gain at ratio `q > 1`. `x` holds interleaved `(re, im)`
/// pairs: `dim` of them for a dense operator, or the coordinates
/// `-m..=m` of a shift state (`x_len = 2 * (2m + 1)`).
///
/// # Safety
/// `op` must be a live handle, `x` must point to `x_len` doubles and the
/// outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_bgain(
    op: *const ShadowspecOperator,
    x: *const f64,
    x_len: usize,
    q: f64,
    gain_measured: *mut f64,
    gain_identity: *mut f64,
) -> ShadowspecStatus {
    guard(|| {
        let op = handle(op)?;
        if x.is_null() {
            return Err(null("x"));
        }
        if gain_measured.is_null() || gain_identity.is_null() {
            return Err(null("gain output"));
        }
        if x_len % 2 != 0 {
            return Err(fail(Error::InvalidArgument("x_len must be even".into())));
        }
        let raw = std::slice::from_raw_parts(x, x_len);
        let values: Vec<C64> = raw.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        let vector = match op {
            Operator::Dense(a) => {
                if values.len() != a.dim() {
                    return Err(fail(Error::DimensionMismatch {
                        expected: a.dim(),
                        found: values.len(),
                    }));
                }
                Vector::Dense(values)
            }
            Operator::Shift(_) => {
                if values.len() % 2 == 0 {
                    return Err(fail(Error::InvalidArgument(
                        "shift states need an odd number of coordinates".into(),
                    )));
                }
                let m = (values.len() / 2) as i64;
                Vector::Supported(SupportedVector::from_window(-m, &values))
            }
        };
        let res = shadowing::bgain_test_sequence(op, &vector, q, None).map_err(fail)?;
        *gain_measured = res.gain_measured;
        *gain_identity = res.gain_identity;
        Ok(())
    })
}

/// Releases a string returned by the library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn shadowspec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

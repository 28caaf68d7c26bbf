//! C ABI over piclab. Protocols live behind an opaque handle; every call
//! returns a [`PiclabStatus`] and leaves a message for
//! [`piclab_last_error_message`] when it fails.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_traits::ToPrimitive;
use piclab::compression::{compression_theorem_check, CompressionError, Compressor, TheoremCheck};
use piclab::measures::{publicize, Analysis, InputDistribution, MeasureError};
use piclab::model::{is_oblivious, tree, ProtocolDef, SimError};
use piclab::zoo;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiclabStatus {
    Ok = 0,
    InvalidArgument = 1,
    BudgetExceeded = 2,
    ModelViolation = 3,
    NotOblivious = 4,
    Internal = 5,
}

/// Opaque protocol handle.
pub struct PiclabProtocol {
    def: ProtocolDef,
}

/// Measures under one input distribution, in bits.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PiclabMeasures {
    pub cc: u64,
    pub acc: f64,
    pub ic: f64,
    pub pic: f64,
    pub pic_random_term: f64,
    pub transcript_entropy: f64,
    pub spy_info: f64,
    /// NaN when the protocol declares no functions.
    pub privacy_leakage: f64,
}

/// Summary of an exact compression check.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PiclabCompression {
    pub ic: f64,
    pub entropy_sum: f64,
    pub expected_moves: f64,
    pub expected_stages: f64,
    pub acc: f64,
    pub bound: f64,
    pub profiles_exact: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(PiclabStatus, String);

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Failure(PiclabStatus::InvalidArgument, msg.into())
    }
}

fn sim_status(e: &SimError) -> PiclabStatus {
    match e {
        SimError::BudgetExceeded { .. } => PiclabStatus::BudgetExceeded,
        SimError::InvalidArgument(_) => PiclabStatus::InvalidArgument,
        _ => PiclabStatus::ModelViolation,
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure(sim_status(&e), e.to_string())
    }
}

impl From<MeasureError> for Failure {
    fn from(e: MeasureError) -> Self {
        let status = match &e {
            MeasureError::Sim(s) => sim_status(s),
            MeasureError::Info(_) => PiclabStatus::Internal,
            _ => PiclabStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<CompressionError> for Failure {
    fn from(e: CompressionError) -> Self {
        let status = match e {
            CompressionError::Measure(m) => return m.into(),
            CompressionError::NotOblivious { .. } => PiclabStatus::NotOblivious,
            CompressionError::InvariantBreach(_) | CompressionError::ErrorBound { .. } => {
                PiclabStatus::Internal
            }
            _ => PiclabStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PiclabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PiclabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PiclabStatus::Internal
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::invalid(format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(p: *const PiclabProtocol) -> Result<&'a PiclabProtocol, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::invalid("protocol handle is null"))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::invalid("output pointer is null"));
    }
    out.write(v);
    Ok(())
}

fn opt(v: u32) -> Option<usize> {
    (v > 0).then_some(v as usize)
}

unsafe fn distribution(p: &ProtocolDef, json: *const c_char) -> Result<InputDistribution, Failure> {
    if json.is_null() {
        return Ok(InputDistribution::uniform(p));
    }
    Ok(InputDistribution::from_json_str(
        "ffi",
        text(json, "distribution")?,
        p,
    )?)
}

/// Creates a built-in protocol. Zero for `k`, `n` or `q` selects the
/// default. The handle must be released with [`piclab_protocol_free`].
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn piclab_protocol_from_registry(
    name: *const c_char,
    k: u32,
    n: u32,
    q: u32,
    out: *mut *mut PiclabProtocol,
) -> PiclabStatus {
    guard(|| {
        let name = text(name, "name")?;
        let e = zoo::by_name(name, opt(k), opt(n), opt(q))
            .map_err(|e| Failure::invalid(e.to_string()))?;
        write(out, Box::into_raw(Box::new(PiclabProtocol { def: e.def })))
    })
}

/// Parses a protocol-tree JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn piclab_protocol_from_tree_json(
    json: *const c_char,
    out: *mut *mut PiclabProtocol,
) -> PiclabStatus {
    guard(|| {
        let def = tree::from_json_str(text(json, "json")?)
            .map_err(|e| Failure::invalid(e.to_string()))?;
        write(out, Box::into_raw(Box::new(PiclabProtocol { def })))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn piclab_protocol_free(p: *mut PiclabProtocol) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of players, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn piclab_protocol_players(p: *const PiclabProtocol) -> u32 {
    p.as_ref().map_or(0, |h| h.def.k as u32)
}

unsafe fn measure(
    p: *const PiclabProtocol,
    dist: *const c_char,
    budget: u64,
    out: *mut PiclabMeasures,
) -> Result<(), Failure> {
    let h = handle(p)?;
    let mu = distribution(&h.def, dist)?;
    let a = Analysis::from_protocol(&h.def, mu, budget)?;
    let (ic, random) = a.pic_decomposition()?;
    let m = PiclabMeasures {
        cc: a.cc() as u64,
        acc: a.acc().to_f64().unwrap_or(f64::NAN),
        ic,
        pic: a.pic()?,
        pic_random_term: random,
        transcript_entropy: a.transcript_entropy()?,
        spy_info: a.spy_info()?,
        privacy_leakage: match h.def.family {
            Some(_) => a.privacy_leakage()?,
            None => f64::NAN,
        },
    };
    write(out, m)
}

/// Measures under the uniform input distribution.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn piclab_measure_uniform(
    p: *const PiclabProtocol,
    budget: u64,
    out: *mut PiclabMeasures,
) -> PiclabStatus {
    guard(|| measure(p, ptr::null(), budget, out))
}

/// Measures under a distribution given as JSON: an array of
/// `[[input, ...], numerator, denominator]` rows.
///
/// # Safety
/// `p` must be a live handle, `dist_json` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn piclab_measure_with_distribution(
    p: *const PiclabProtocol,
    dist_json: *const c_char,
    budget: u64,
    out: *mut PiclabMeasures,
) -> PiclabStatus {
    guard(|| {
        if dist_json.is_null() {
            return Err(Failure::invalid("distribution is null"));
        }
        measure(p, dist_json, budget, out)
    })
}

/// Full measure report as a JSON string. A null distribution means
/// uniform. Free the string with [`piclab_string_free`].
///
/// # Safety
/// `p` must be a live handle, `dist_json` null or a NUL-terminated string,
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn piclab_report_json(
    p: *const PiclabProtocol,
    dist_json: *const c_char,
    budget: u64,
    tolerance: f64,
    out: *mut *mut c_char,
) -> PiclabStatus {
    guard(|| {
        let h = handle(p)?;
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Failure::invalid("tolerance must be positive"));
        }
        let mu = distribution(&h.def, dist_json)?;
        let report = Analysis::from_protocol(&h.def, mu, budget)?.report(tolerance)?;
        let s = CString::new(report.to_json())
            .map_err(|_| Failure(PiclabStatus::Internal, "nul in report".into()))?;
        write(out, s.into_raw())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn piclab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Whether every execution follows one communication pattern.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn piclab_is_oblivious(
    p: *const PiclabProtocol,
    budget: u64,
    out: *mut bool,
) -> PiclabStatus {
    guard(|| {
        let h = handle(p)?;
        let (ok, _) = is_oblivious(&h.def, budget)?;
        write(out, ok)
    })
}

/// Runs the staged compression with exact lcp boxes on every input under
/// the uniform distribution. Private tapes are made public first.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn piclab_compress_exact(
    p: *const PiclabProtocol,
    budget: u64,
    out: *mut PiclabCompression,
) -> PiclabStatus {
    guard(|| {
        let h = handle(p)?;
        let def = publicize(&h.def);
        let c = Compressor::new(&def, InputDistribution::uniform(&def), budget)?;
        let r = compression_theorem_check(&c, &TheoremCheck::default())?;
        write(
            out,
            PiclabCompression {
                ic: r.ic,
                entropy_sum: r.entropy_sum,
                expected_moves: r.expected_moves,
                expected_stages: r.expected_stages,
                acc: r.acc,
                bound: r.bound,
                profiles_exact: r.profiles_exact,
            },
        )
    })
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn piclab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

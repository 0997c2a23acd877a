//! C ABI for `hypdich`.
//!
//! Every fallible function returns an [`HdStatus`]; on failure the message is
//! kept per thread and read with [`hd_last_error`]. Strings returned through
//! out-pointers are owned by the caller and released with [`hd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hypdich::coefficients::{compute_extrema, validate_system, HyperbolicSystem, SystemDoc, SystemError};
use hypdich::conditions::{corollary_check, remark_constant_thresholds, theorem3_check, ConditionError};
use hypdich::dichotomy::{detect, DichotomyConfig, DichotomyError};
use hypdich::evolution::{exp_bound, Evolution, EvolutionConfig, EvolutionError};
use hypdich::expr::Expr;
use hypdich::grid::GridFunction;
use hypdich::reduction::{reduce_doc, ReductionError, SecondOrderDoc};
use hypdich::report::to_json;

/// Result codes. The numeric values of the nonzero codes match the exit codes
/// of the command-line tool where both exist.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidInput = 2,
    Numerical = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

/// Validated system.
pub struct HdSystem {
    inner: HyperbolicSystem,
}

/// Parsed expression in `x` and `t`.
pub struct HdExpr {
    inner: Expr,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(HdStatus, String);

impl Failure {
    fn new(status: HdStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

impl From<SystemError> for Failure {
    fn from(e: SystemError) -> Self {
        Failure::new(HdStatus::InvalidInput, e.to_string())
    }
}

impl From<ConditionError> for Failure {
    fn from(e: ConditionError) -> Self {
        let status = match e {
            ConditionError::Char(_) => HdStatus::Numerical,
            ConditionError::Window(..) => HdStatus::InvalidArgument,
            _ => HdStatus::InvalidInput,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<EvolutionError> for Failure {
    fn from(e: EvolutionError) -> Self {
        let status = match e {
            EvolutionError::Config(_) | EvolutionError::Shape { .. } => HdStatus::InvalidArgument,
            EvolutionError::Eval { .. } => HdStatus::InvalidInput,
            _ => HdStatus::Numerical,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<DichotomyError> for Failure {
    fn from(e: DichotomyError) -> Self {
        match e {
            DichotomyError::Evolution(v) => v.into(),
            DichotomyError::Config(_) | DichotomyError::WindowTooShort { .. } | DichotomyError::TooLarge { .. } => {
                Failure::new(HdStatus::InvalidArgument, e.to_string())
            }
            _ => Failure::new(HdStatus::Numerical, e.to_string()),
        }
    }
}

impl From<ReductionError> for Failure {
    fn from(e: ReductionError) -> Self {
        Failure::new(HdStatus::InvalidInput, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            HdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(HdStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(HdStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(HdStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write_out<T>(out: *mut T, v: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(HdStatus::NullPointer, format!("{name} is null")));
    }
    out.write(v);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure::new(HdStatus::Numerical, "report contains a nul byte"))?;
    write_out(out, c.into_raw(), "out")
}

fn parse_doc<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::new(HdStatus::InvalidInput, format!("invalid {what} document: {e}")))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a system document.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hd_system_from_json(json: *const c_char, out: *mut *mut HdSystem) -> HdStatus {
    guard(|| {
        let doc: SystemDoc = parse_doc(str_arg(json, "json")?, "system")?;
        let sys = validate_system(&doc)?;
        write_out(out, Box::into_raw(Box::new(HdSystem { inner: sys })), "out")
    })
}

/// # Safety
/// `sys` must be null or a handle from [`hd_system_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_system_free(sys: *mut HdSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_system_dimension(sys: *const HdSystem, out: *mut usize) -> HdStatus {
    guard(|| write_out(out, ref_arg(sys, "sys")?.inner.n(), "out"))
}

/// Sampled coefficient bounds as JSON.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_extrema_json(sys: *const HdSystem, n_x: usize, n_t: usize, out: *mut *mut c_char) -> HdStatus {
    guard(|| {
        let sys = &ref_arg(sys, "sys")?.inner;
        if n_x < 2 || n_t < 2 {
            return Err(Failure::new(HdStatus::InvalidArgument, "n_x and n_t must be at least 2"));
        }
        let ext = compute_extrema(sys, n_x, n_t)?;
        let eb = exp_bound(&ext, sys.n());
        write_string(out, to_json(&serde_json::json!({ "extrema": ext, "exp_bound": eb })))
    })
}

/// Per-component damping conditions and the contraction bound as JSON.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_check_th3_json(sys: *const HdSystem, out: *mut *mut c_char) -> HdStatus {
    guard(|| {
        let sys = &ref_arg(sys, "sys")?.inner;
        let ext = compute_extrema(sys, 257, 257)?;
        let theorem = theorem3_check(sys, &ext)?;
        let corollary = corollary_check(sys, &ext)?;
        write_string(out, to_json(&serde_json::json!({ "theorem": theorem, "corollary": corollary })))
    })
}

/// Damping threshold of one constant-coefficient component.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hd_remark_threshold(a: f64, b: f64, out: *mut f64) -> HdStatus {
    guard(|| write_out(out, remark_constant_thresholds(a, b)?, "out"))
}

/// Propagates `u_in` from time `s` to time `t`. Both buffers hold
/// `n * n_points` values, component-major, on the nodes `i / n_points`.
///
/// # Safety
/// `sys` must be a live handle; `u_in` readable and `u_out` writable for `len`
/// values. The buffers may not overlap.
#[no_mangle]
pub unsafe extern "C" fn hd_evolve(
    sys: *const HdSystem,
    n_points: usize,
    dt: f64,
    t: f64,
    s: f64,
    u_in: *const f64,
    u_out: *mut f64,
    len: usize,
) -> HdStatus {
    guard(|| {
        let sys = &ref_arg(sys, "sys")?.inner;
        if u_in.is_null() || u_out.is_null() {
            return Err(Failure::new(HdStatus::NullPointer, "u_in and u_out must not be null"));
        }
        if len != sys.n() * n_points {
            return Err(Failure::new(
                HdStatus::InvalidArgument,
                format!("buffer length {len}, expected {}", sys.n() * n_points),
            ));
        }
        if !(t.is_finite() && s.is_finite()) {
            return Err(Failure::new(HdStatus::InvalidArgument, "t and s must be finite"));
        }
        let evo = Evolution::new(sys, EvolutionConfig::with_grid(n_points, dt))?;
        let u = GridFunction::from_vec(sys.n(), n_points, std::slice::from_raw_parts(u_in, len).to_vec());
        let v = evo.apply(t, s, &u)?;
        std::slice::from_raw_parts_mut(u_out, len).copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// Dichotomy detection report as JSON.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_dichotomy_json(
    sys: *const HdSystem,
    n_points: usize,
    refine: bool,
    skip_svd: bool,
    out: *mut *mut c_char,
) -> HdStatus {
    guard(|| {
        let sys = &ref_arg(sys, "sys")?.inner;
        let cfg = DichotomyConfig { n_points, refine, skip_svd, ..Default::default() };
        let r = detect(sys, &cfg)?;
        write_string(out, to_json(&r))
    })
}

/// Reduces a second-order document and returns the first-order system document.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_reduce_json(json: *const c_char, out: *mut *mut c_char) -> HdStatus {
    guard(|| {
        let doc: SecondOrderDoc = parse_doc(str_arg(json, "json")?, "second-order")?;
        let sys = reduce_doc(&doc)?;
        write_string(out, to_json(&sys.to_doc()))
    })
}

/// # Safety
/// `src` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_expr_parse(src: *const c_char, out: *mut *mut HdExpr) -> HdStatus {
    guard(|| {
        let e = Expr::parse(str_arg(src, "src")?).map_err(|e| Failure::new(HdStatus::InvalidInput, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(HdExpr { inner: e })), "out")
    })
}

/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_expr_eval(e: *const HdExpr, x: f64, t: f64, out: *mut f64) -> HdStatus {
    guard(|| {
        let v = ref_arg(e, "e")?.inner.eval(x, t).map_err(|e| Failure::new(HdStatus::Numerical, e.to_string()))?;
        write_out(out, v, "out")
    })
}

/// Canonical text of the expression.
///
/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_expr_to_string(e: *const HdExpr, out: *mut *mut c_char) -> HdStatus {
    guard(|| {
        let s = ref_arg(e, "e")?.inner.to_string();
        write_string(out, s)
    })
}

/// # Safety
/// `e` must be null or a handle from [`hd_expr_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_expr_free(e: *mut HdExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

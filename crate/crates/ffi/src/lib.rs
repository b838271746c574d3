//! C ABI for `uc2d`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`Uc2dStatus`]; on failure the message is available from
//! [`uc2d_last_error`] on the same thread. Panics never unwind into C.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use uc2d::fields::{builtin, CoefficientSet};
use uc2d::lab::{run_experiment, ExperimentConfig, ExperimentKind};
use uc2d::mesh::Disk;
use uc2d::reduction::{reduce, verify_factorization, ReductionParameters, ReductionResult};
use uc2d::{Error, Mat2, Point};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uc2dStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    NonElliptic = 3,
    SolverFailure = 4,
    NoConvergence = 5,
    MultiplierFailure = 6,
    BeltramiFailure = 7,
    /// An experiment ran but one of its stages failed; the report is still
    /// returned.
    StageFailed = 8,
    Io = 9,
    Panic = 10,
}

/// A coefficient set `(A, B, C, d)`.
pub struct Uc2dCoefficients {
    inner: CoefficientSet,
}

/// The output of the multiplier reduction, with the coefficients it was
/// built from.
pub struct Uc2dReduction {
    coeffs: CoefficientSet,
    inner: ReductionResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> Uc2dStatus {
    match e {
        Error::InvalidArgument(_) | Error::Raster { .. } | Error::Json(_) | Error::MisdeclaredConstant { .. } => {
            Uc2dStatus::InvalidArgument
        }
        Error::NonElliptic { .. } | Error::EllipticityViolation { .. } => Uc2dStatus::NonElliptic,
        Error::SolverFailure { .. } | Error::Degenerate(_) => Uc2dStatus::SolverFailure,
        Error::NoContraction { .. } | Error::NotConverged { .. } => Uc2dStatus::NoConvergence,
        Error::RadiusExhausted { .. } | Error::InvalidMultiplier { .. } => Uc2dStatus::MultiplierFailure,
        Error::NotCurlFree { .. } | Error::SimilarityFailure { .. } => Uc2dStatus::BeltramiFailure,
        Error::Io(_) => Uc2dStatus::Io,
    }
}

/// Runs `body`, translating errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<Uc2dStatus, (Uc2dStatus, String)>) -> Uc2dStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            Uc2dStatus::Panic
        }
    }
}

fn fail(e: Error) -> (Uc2dStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (Uc2dStatus, String) {
    (Uc2dStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (Uc2dStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (Uc2dStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uc2d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uc2d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a builtin coefficient set. `params_json` is a JSON object of
/// numeric parameters, or NULL for the defaults.
///
/// # Safety
/// `name` and `params_json` (if non-null) must be NUL-terminated strings;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc2d_coefficients_builtin(
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut Uc2dCoefficients,
) -> Uc2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = read_str(name, "name")?;
        let params: BTreeMap<String, f64> = if params_json.is_null() {
            BTreeMap::new()
        } else {
            serde_json::from_str(read_str(params_json, "params_json")?)
                .map_err(|e| (Uc2dStatus::InvalidArgument, format!("params_json: {e}")))?
        };
        let inner = builtin(name, &params).map_err(fail)?;
        *out = Box::into_raw(Box::new(Uc2dCoefficients { inner }));
        Ok(Uc2dStatus::Ok)
    })
}

/// # Safety
/// `handle` must come from [`uc2d_coefficients_builtin`] and not be freed
/// twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn uc2d_coefficients_free(handle: *mut Uc2dCoefficients) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Builds the multipliers on the disk `B_radius((cx, cy))` at the given mesh
/// resolution with default reduction parameters.
///
/// # Safety
/// `coeffs` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc2d_reduce(
    coeffs: *const Uc2dCoefficients,
    cx: f64,
    cy: f64,
    radius: f64,
    resolution: usize,
    out: *mut *mut Uc2dReduction,
) -> Uc2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let coeffs = coeffs.as_ref().ok_or_else(|| null("coeffs"))?;
        let params = ReductionParameters {
            resolution,
            ..Default::default()
        };
        let inner = reduce(&coeffs.inner, &Disk::new(Point::new(cx, cy), radius), &params).map_err(fail)?;
        *out = Box::into_raw(Box::new(Uc2dReduction {
            coeffs: coeffs.inner.clone(),
            inner,
        }));
        Ok(Uc2dStatus::Ok)
    })
}

/// Radii `R₁` (multiplier `m`) and `R₂` (multiplier `w`).
///
/// # Safety
/// `handle` must be live; `r1`, `r2` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn uc2d_reduction_radii(handle: *const Uc2dReduction, r1: *mut f64, r2: *mut f64) -> Uc2dStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        if r1.is_null() || r2.is_null() {
            return Err(null("output"));
        }
        *r1 = h.inner.r1();
        *r2 = h.inner.r2();
        Ok(Uc2dStatus::Ok)
    })
}

/// Largest relative factorization residual over `trials` seeded test pairs.
///
/// # Safety
/// `handle` must be live; `residual` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc2d_reduction_verify(
    handle: *const Uc2dReduction,
    trials: usize,
    seed: u64,
    residual: *mut f64,
) -> Uc2dStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        if residual.is_null() {
            return Err(null("residual"));
        }
        *residual = verify_factorization(&h.coeffs, &h.inner, trials, seed).map_err(fail)?;
        Ok(Uc2dStatus::Ok)
    })
}

/// Reduction diagnostics as a JSON string; release with [`uc2d_string_free`].
///
/// # Safety
/// `handle` must be live; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc2d_reduction_diagnostics(handle: *const Uc2dReduction, out: *mut *mut c_char) -> Uc2dStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(h.inner.to_json().map_err(fail)?);
        Ok(Uc2dStatus::Ok)
    })
}

/// # Safety
/// `handle` must come from [`uc2d_reduce`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uc2d_reduction_free(handle: *mut Uc2dReduction) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Complex dilatations of the row-major 2×2 matrix `a`; writes
/// `[Re μ, Im μ, Re ν, Im ν]` into `out`.
///
/// # Safety
/// `a` must point to 4 readable doubles and `out` to 4 writable ones.
#[no_mangle]
pub unsafe extern "C" fn uc2d_dilatations(a: *const f64, out: *mut f64) -> Uc2dStatus {
    guard(|| {
        if a.is_null() || out.is_null() {
            return Err(null("matrix or output"));
        }
        let a = std::slice::from_raw_parts(a, 4);
        let m = Mat2::new(a[0], a[1], a[2], a[3]);
        if !(uc2d::sym_min_eigenvalue(&m) > 0.0) {
            return Err((
                Uc2dStatus::NonElliptic,
                "symmetric part is not positive definite".into(),
            ));
        }
        let (mu, nu) = uc2d::beltrami::dilatations(&m);
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&[mu.re, mu.im, nu.re, nu.im]);
        Ok(Uc2dStatus::Ok)
    })
}

fn parse_kind(name: &str) -> Option<ExperimentKind> {
    Some(match name {
        "pipeline" => ExperimentKind::Pipeline,
        "contraction" | "contraction_scaling" => ExperimentKind::ContractionScaling,
        "doubling" => ExperimentKind::Doubling,
        "three-spheres" | "three_spheres" => ExperimentKind::ThreeSpheres,
        "vanishing-order" | "vanishing_order" => ExperimentKind::VanishingOrder,
        _ => return None,
    })
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NULs removed")
        .into_raw()
}

/// Runs an experiment from a JSON config and returns its `report.json`
/// content in `report` (release with [`uc2d_string_free`]). Returns
/// `StageFailed` with the report set when a stage failed.
///
/// # Safety
/// `kind` and `config_json` must be NUL-terminated strings; `report` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn uc2d_run_experiment(
    kind: *const c_char,
    config_json: *const c_char,
    report: *mut *mut c_char,
) -> Uc2dStatus {
    guard(|| {
        if report.is_null() {
            return Err(null("report"));
        }
        *report = ptr::null_mut();
        let name = read_str(kind, "kind")?;
        let kind =
            parse_kind(name).ok_or_else(|| (Uc2dStatus::InvalidArgument, format!("unknown experiment {name:?}")))?;
        let config = ExperimentConfig::from_json(read_str(config_json, "config_json")?).map_err(fail)?;
        let outputs = run_experiment(kind, &config).map_err(|e| (Uc2dStatus::InvalidArgument, e.to_string()))?;
        *report = to_c_string(outputs.report);
        if outputs.success {
            Ok(Uc2dStatus::Ok)
        } else {
            Err((Uc2dStatus::StageFailed, "a stage failed; see the report".into()))
        }
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uc2d_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

//! C ABI over `mfinv-core`.
//!
//! Objects are opaque handles created by `mfinv_*_new` style functions and
//! released with the matching `_free`. Every fallible call returns an
//! `MfinvStatus`; on failure `mfinv_last_error` describes the problem for
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mfinv_core::cascade::{generate_cascade, CascadeSpec};
use mfinv_core::grid::order_grid;
use mfinv_core::inversion::{inversion_check, InversionCheck};
use mfinv_core::measure::VolatilitySeries;
use mfinv_core::partition::log_moment_sum;
use mfinv_core::pipeline::{run_direct, run_inverse, DirectOptions, InverseOptions};
use mfinv_core::scaling::ExponentCurve;
use mfinv_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfinvStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Domain = 3,
    Numerical = 4,
    Resource = 5,
    Fit = 6,
    Detection = 7,
    Inversion = 8,
    Degenerate = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for MfinvStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) => MfinvStatus::Validation,
            Error::ZeroWeight { .. } => MfinvStatus::Domain,
            Error::NonConvergence { .. } => MfinvStatus::Numerical,
            Error::Resource(_) => MfinvStatus::Resource,
            Error::Fit(_) => MfinvStatus::Fit,
            Error::Detection(_) => MfinvStatus::Detection,
            Error::Inversion(_) => MfinvStatus::Inversion,
            Error::Degenerate(_) => MfinvStatus::Degenerate,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => MfinvStatus::Io,
        }
    }
}

/// Multiplicative cascade specification.
pub struct MfinvCascade(CascadeSpec);

/// Nonnegative volatility series.
pub struct MfinvSeries(VolatilitySeries);

/// Scaling exponents with standard errors.
pub struct MfinvCurve(ExponentCurve);

/// Result of the two-way inversion check.
pub struct MfinvReport(InversionCheck);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F>(f: F) -> MfinvStatus
where
    F: FnOnce() -> Result<(), MfinvStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfinvStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            MfinvStatus::Panic
        }
    }
}

fn fail(e: Error) -> MfinvStatus {
    let status = MfinvStatus::from(&e);
    set_error(e.to_string());
    status
}

fn null(what: &str) -> MfinvStatus {
    set_error(format!("{what} is null"));
    MfinvStatus::NullPointer
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], MfinvStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, MfinvStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), MfinvStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the last failed call on this thread, or NULL.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn mfinv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfinv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a cascade from `n` weights and ratios. `ratios` may be NULL
/// for equal ratios `1/n`.
///
/// # Safety
/// `weights` (and `ratios` when non-NULL) must point to `n` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_cascade_new(
    weights: *const f64,
    ratios: *const f64,
    n: usize,
    out: *mut *mut MfinvCascade,
) -> MfinvStatus {
    guard(|| {
        let w = slice(weights, n, "weights")?.to_vec();
        let r = if ratios.is_null() {
            vec![1.0 / n.max(1) as f64; n]
        } else {
            slice(ratios, n, "ratios")?.to_vec()
        };
        let spec = CascadeSpec::new(w, r).map_err(fail)?;
        put(out, boxed(MfinvCascade(spec)), "out")
    })
}

/// # Safety
/// `spec` must be NULL or a handle from `mfinv_cascade_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn mfinv_cascade_free(spec: *mut MfinvCascade) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Analytic `tau(q)`.
///
/// # Safety
/// `spec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_cascade_tau(spec: *const MfinvCascade, q: f64, out: *mut f64) -> MfinvStatus {
    guard(|| {
        let s = handle(spec, "spec")?;
        put(out, s.0.tau(q).map_err(fail)?, "out")
    })
}

/// Analytic `theta(p)`.
///
/// # Safety
/// `spec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_cascade_theta(spec: *const MfinvCascade, p: f64, out: *mut f64) -> MfinvStatus {
    guard(|| {
        let s = handle(spec, "spec")?;
        put(out, s.0.theta(p).map_err(fail)?, "out")
    })
}

/// Copies `n` samples into a new series.
///
/// # Safety
/// `values` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_series_new(values: *const f64, n: usize, out: *mut *mut MfinvSeries) -> MfinvStatus {
    guard(|| {
        let v = slice(values, n, "values")?.to_vec();
        let series = VolatilitySeries::new(v).map_err(fail)?;
        put(out, boxed(MfinvSeries(series)), "out")
    })
}

/// Cascade masses at `depth` as a series. `seed` is used only when
/// `shuffle` is true.
///
/// # Safety
/// `spec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_series_from_cascade(
    spec: *const MfinvCascade,
    depth: u32,
    shuffle: bool,
    seed: u64,
    out: *mut *mut MfinvSeries,
) -> MfinvStatus {
    guard(|| {
        let s = handle(spec, "spec")?;
        if !s.0.is_regular() {
            return Err(fail(Error::Validation(
                "a cascade used as a series must have equal ratios".into(),
            )));
        }
        let m = generate_cascade(&s.0, depth, shuffle.then_some(seed)).map_err(fail)?;
        let series = VolatilitySeries::new(m.weights).map_err(fail)?;
        put(out, boxed(MfinvSeries(series)), "out")
    })
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `series` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfinv_series_len(series: *const MfinvSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `series` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn mfinv_series_free(series: *mut MfinvSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// `ln sum w^q` computed without underflow.
///
/// # Safety
/// `weights` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_log_moment_sum(weights: *const f64, n: usize, q: f64, out: *mut f64) -> MfinvStatus {
    guard(|| {
        let w = slice(weights, n, "weights")?;
        put(out, log_moment_sum(w, q).map_err(fail)?, "out")
    })
}

/// `tau(q)` by box counting over orders `q_min..=q_max` in steps of
/// `q_step`, with the scaling range detected automatically.
///
/// # Safety
/// `series` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_direct_exponents(
    series: *const MfinvSeries,
    q_min: f64,
    q_max: f64,
    q_step: f64,
    out: *mut *mut MfinvCurve,
) -> MfinvStatus {
    guard(|| {
        let s = handle(series, "series")?;
        let opts = DirectOptions {
            orders: order_grid(q_min, q_max, q_step).map_err(fail)?,
            ..Default::default()
        };
        let run = run_direct(&s.0, &opts).map_err(fail)?;
        put(out, boxed(MfinvCurve(run.curve)), "out")
    })
}

/// `theta(p)` from exit times, with the scaling range detected
/// automatically.
///
/// # Safety
/// `series` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_inverse_exponents(
    series: *const MfinvSeries,
    p_min: f64,
    p_max: f64,
    p_step: f64,
    out: *mut *mut MfinvCurve,
) -> MfinvStatus {
    guard(|| {
        let s = handle(series, "series")?;
        let opts = InverseOptions {
            orders: order_grid(p_min, p_max, p_step).map_err(fail)?,
            ..Default::default()
        };
        let run = run_inverse(&s.0, &opts).map_err(fail)?;
        put(out, boxed(MfinvCurve(run.curve)), "out")
    })
}

/// Number of fitted orders, or 0 for NULL.
///
/// # Safety
/// `curve` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfinv_curve_len(curve: *const MfinvCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.len())
}

/// Reads entry `i`. Any of the output pointers may be NULL.
///
/// # Safety
/// `curve` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_curve_get(
    curve: *const MfinvCurve,
    i: usize,
    order: *mut f64,
    exponent: *mut f64,
    stderr: *mut f64,
) -> MfinvStatus {
    guard(|| {
        let c = &handle(curve, "curve")?.0;
        if i >= c.len() {
            return Err(fail(Error::Validation(format!("index {i} out of range (len {})", c.len()))));
        }
        for (p, v) in [(order, c.orders[i]), (exponent, c.exponents[i]), (stderr, c.stderrs[i])] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `curve` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn mfinv_curve_free(curve: *mut MfinvCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Compares `tau(q)` with `-theta^-1(-q)` and `theta(p)` with
/// `-tau^-1(-p)`.
///
/// # Safety
/// Both curves must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_inversion_check(
    direct: *const MfinvCurve,
    inverse: *const MfinvCurve,
    out: *mut *mut MfinvReport,
) -> MfinvStatus {
    guard(|| {
        let d = handle(direct, "direct")?;
        let i = handle(inverse, "inverse")?;
        let report = inversion_check(&d.0, &i.0).map_err(fail)?;
        put(out, boxed(MfinvReport(report)), "out")
    })
}

/// Summary of a report. Any of the output pointers may be NULL.
///
/// # Safety
/// `report` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfinv_report_summary(
    report: *const MfinvReport,
    max_abs_diff: *mut f64,
    within_error_bars: *mut bool,
    coverage: *mut f64,
) -> MfinvStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        if !max_abs_diff.is_null() {
            max_abs_diff.write(r.max_abs_diff);
        }
        if !within_error_bars.is_null() {
            within_error_bars.write(r.within_error_bars);
        }
        if !coverage.is_null() {
            coverage.write(r.coverage);
        }
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn mfinv_report_free(report: *mut MfinvReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

//! C ABI for `erasure-obs`.
//!
//! Models and Monte Carlo reports are opaque handles created and freed
//! through this API. Every fallible call returns an [`EoStatus`]; on failure
//! a message for the calling thread is available from [`eo_last_error`].
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use erasure_obs::dynsys::{builtin, ModelDescriptor};
use erasure_obs::limits::{critical_p_from_exponents, entropy_condition, linear_critical_p, CriticalProbability};
use erasure_obs::lyapunov;
use erasure_obs::simulate::{monte_carlo, MonteCarloConfig};
use erasure_obs::{Error, MonteCarloReport, ObserverGain, SystemModel, Vector};
use libc::c_char;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Diverged = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// A system model together with its observer gain.
pub struct EoModel {
    model: SystemModel,
    gain: ObserverGain,
}

/// Monte Carlo mean-square error report.
pub struct EoReport {
    report: MonteCarloReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EoStatus {
    match e {
        Error::Diverged { .. } => EoStatus::Diverged,
        Error::DegenerateCocycle { .. }
        | Error::SingularJacobian { .. }
        | Error::Singular(_)
        | Error::NotConverged { .. } => EoStatus::Numerical,
        Error::Io(_) => EoStatus::Io,
        _ => EoStatus::InvalidArgument,
    }
}

/// Internal failure: a status plus the message to record.
struct Fail(EoStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EoStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EoStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            EoStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for reads of `len` values.
unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for writes of `len` values.
unsafe fn write_slice<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(EoStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn model_ref<'a>(p: *const EoModel) -> Result<&'a EoModel, Fail> {
    p.as_ref().ok_or_else(|| null("model"))
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn report_ref<'a>(p: *const EoReport) -> Result<&'a EoReport, Fail> {
    p.as_ref().ok_or_else(|| null("report"))
}

fn check_state_len(model: &SystemModel, len: usize, what: &str) -> Result<(), Fail> {
    if len != model.state_dim() {
        return Err(Fail(
            EoStatus::InvalidArgument,
            format!("`{what}` has length {len}, model state dimension is {}", model.state_dim()),
        ));
    }
    Ok(())
}

/// Message describing the last failure on this thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a built-in model (`henon`, `linear-scalar`, `linear-diagonal`,
/// `logistic`) with its deadbeat gain.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eo_model_builtin(name: *const c_char, out: *mut *mut EoModel) -> EoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (model, gain) = builtin(read_str(name, "name")?)?;
        *out = Box::into_raw(Box::new(EoModel { model, gain }));
        Ok(())
    })
}

/// Creates a model from a JSON polynomial descriptor.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eo_model_from_json(json: *const c_char, out: *mut *mut EoModel) -> EoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (model, gain) = ModelDescriptor::from_json(read_str(json, "json")?)?.build()?;
        *out = Box::into_raw(Box::new(EoModel { model, gain }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this API not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eo_model_free(model: *mut EoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State dimension N and output dimension M.
///
/// # Safety
/// `model` must be a live handle; `state_dim`, `output_dim` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eo_model_dims(
    model: *const EoModel,
    state_dim: *mut usize,
    output_dim: *mut usize,
) -> EoStatus {
    guard(|| {
        let m = model_ref(model)?;
        if state_dim.is_null() || output_dim.is_null() {
            return Err(null("state_dim/output_dim"));
        }
        *state_dim = m.model.state_dim();
        *output_dim = m.model.output_dim();
        Ok(())
    })
}

/// `out = f(x)`; both buffers hold N values.
///
/// # Safety
/// `x` valid for N reads, `out` for N writes.
#[no_mangle]
pub unsafe extern "C" fn eo_model_step(model: *const EoModel, x: *const f64, n: usize, out: *mut f64) -> EoStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_state_len(&m.model, n, "x")?;
        let x = Vector::from_column_slice(read_slice(x, n, "x")?);
        let next = m.model.step(&x)?;
        write_slice(out, n, "out")?.copy_from_slice(next.as_slice());
        Ok(())
    })
}

/// Lyapunov spectrum (descending) into `exponents` (N values).
///
/// `horizon` counts all steps including `burn_in`. `residual` may be null.
///
/// # Safety
/// `x0` valid for N reads, `exponents` for N writes, `residual` null or
/// valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eo_lyapunov_spectrum(
    model: *const EoModel,
    x0: *const f64,
    n: usize,
    horizon: usize,
    burn_in: usize,
    renorm_period: usize,
    exponents: *mut f64,
    residual: *mut f64,
) -> EoStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_state_len(&m.model, n, "x0")?;
        let x0 = Vector::from_column_slice(read_slice(x0, n, "x0")?);
        let spec = lyapunov::spectrum(&m.model, &x0, horizon, burn_in, renorm_period)?;
        write_slice(exponents, n, "exponents")?.copy_from_slice(&spec.exponents);
        if !residual.is_null() {
            *residual = spec.convergence_residual;
        }
        Ok(())
    })
}

unsafe fn write_critical(cp: CriticalProbability, p_out: *mut f64, q_out: *mut f64) -> Result<(), Fail> {
    if p_out.is_null() {
        return Err(null("critical_p"));
    }
    *p_out = cp.critical_p;
    if !q_out.is_null() {
        *q_out = cp.critical_q;
    }
    Ok(())
}

/// Critical delivery probability of a linear system whose eigenvalue moduli
/// all exceed one. `critical_q` may be null.
///
/// # Safety
/// `moduli` valid for `len` reads; `critical_p` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eo_linear_critical_p(
    moduli: *const f64,
    len: usize,
    output_dim: usize,
    critical_p: *mut f64,
    critical_q: *mut f64,
) -> EoStatus {
    guard(|| {
        let cp = linear_critical_p(read_slice(moduli, len, "moduli")?, output_dim)?;
        write_critical(cp, critical_p, critical_q)
    })
}

/// Critical delivery probability from Lyapunov exponents (positive part).
/// `critical_q` may be null.
///
/// # Safety
/// `exponents` valid for `len` reads; `critical_p` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eo_nonlinear_critical_p(
    exponents: *const f64,
    len: usize,
    output_dim: usize,
    critical_p: *mut f64,
    critical_q: *mut f64,
) -> EoStatus {
    guard(|| {
        let cp = critical_p_from_exponents(read_slice(exponents, len, "exponents")?, output_dim)?;
        write_critical(cp, critical_p, critical_q)
    })
}

/// Evaluates `M log(1 − p) + 2H < 0`. `lhs` may be null.
///
/// # Safety
/// `satisfied` valid for a write; `lhs` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eo_entropy_condition(
    p: f64,
    output_dim: usize,
    entropy: f64,
    satisfied: *mut bool,
    lhs: *mut f64,
) -> EoStatus {
    guard(|| {
        if satisfied.is_null() {
            return Err(null("satisfied"));
        }
        let v = entropy_condition(p, output_dim, entropy)?;
        *satisfied = v.satisfied;
        if !lhs.is_null() {
            *lhs = v.lhs;
        }
        Ok(())
    })
}

/// Runs `realizations` observer runs over `horizon` steps and stores the
/// averaged squared error in a new report.
///
/// Results depend only on the arguments, not on thread count.
///
/// # Safety
/// `x0`, `xhat0` valid for N reads; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eo_monte_carlo(
    model: *const EoModel,
    x0: *const f64,
    xhat0: *const f64,
    n: usize,
    p: f64,
    horizon: usize,
    realizations: usize,
    noise_amplitude: f64,
    master_seed: u64,
    out: *mut *mut EoReport,
) -> EoStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        check_state_len(&m.model, n, "x0")?;
        let x0 = Vector::from_column_slice(read_slice(x0, n, "x0")?);
        let xhat0 = Vector::from_column_slice(read_slice(xhat0, n, "xhat0")?);
        let cfg = MonteCarloConfig {
            p,
            horizon,
            realizations,
            noise_amplitude,
            master_seed,
        };
        let report = monte_carlo(&m.model, &m.gain, &x0, &xhat0, &cfg)?;
        *out = Box::into_raw(Box::new(EoReport { report }));
        Ok(())
    })
}

/// Number of time points (`horizon + 1`), or 0 for null.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eo_report_len(report: *const EoReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.mean_sq_error.len())
}

/// Copies the mean-square error series; `len` must equal [`eo_report_len`].
///
/// # Safety
/// `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn eo_report_mean_sq_error(report: *const EoReport, out: *mut f64, len: usize) -> EoStatus {
    guard(|| {
        let r = report_ref(report)?;
        let series = &r.report.mean_sq_error;
        if len != series.len() {
            return Err(Fail(
                EoStatus::InvalidArgument,
                format!("buffer length {len}, report has {} points", series.len()),
            ));
        }
        write_slice(out, len, "out")?.copy_from_slice(series);
        Ok(())
    })
}

/// Peak of the mean-square error series (`+inf` when any run diverged).
///
/// # Safety
/// `peak` and `diverged_runs` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eo_report_summary(report: *const EoReport, peak: *mut f64, diverged_runs: *mut usize) -> EoStatus {
    guard(|| {
        let r = report_ref(report)?;
        if peak.is_null() || diverged_runs.is_null() {
            return Err(null("peak/diverged_runs"));
        }
        *peak = r.report.peak_mean_sq_error;
        *diverged_runs = r.report.diverged_runs.len();
        Ok(())
    })
}

/// Releases a report; null is ignored.
///
/// # Safety
/// `report` must be null or a handle from this API not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eo_report_free(report: *mut EoReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

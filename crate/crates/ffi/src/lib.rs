//! C interface to the `mbsindy` library.
//!
//! Datasets and reports are opaque heap handles. Every fallible call returns an
//! [`MbsStatus`]; on failure, [`mbs_last_error_message`] describes the most
//! recent error on the calling thread. Strings handed out by this library must
//! be released with [`mbs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mbsindy::io;
use mbsindy::library::Problem;
use mbsindy::pipeline::{self, DiscoverOptions, Replay};
use mbsindy::report::DiscoveryReport;
use mbsindy::sim::{self, Case, Dataset, SimParams};
use mbsindy::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbsStatus {
    Ok = 0,
    Failure = 1,
    InvalidArgument = 2,
    NoModel = 3,
    Numerical = 4,
    Io = 5,
    NullPointer = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbsCase {
    Planar = 0,
    Star = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbsProblem {
    Stefan = 0,
    Fisher = 1,
}

/// Field snapshots, boundary curves and their manifest.
pub struct MbsDataset {
    inner: Dataset,
}

/// Result of a discovery run.
pub struct MbsReport {
    inner: DiscoveryReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MbsStatus {
    match e {
        Error::InvalidParameter(_) | Error::Cfl { .. } | Error::Shape { .. } => MbsStatus::InvalidArgument,
        Error::NoModel(_) => MbsStatus::NoModel,
        Error::Io { .. } | Error::Format { .. } | Error::MissingSnapshot(_) => MbsStatus::Io,
        e if e.is_numerical() => MbsStatus::Numerical,
        _ => MbsStatus::Failure,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MbsStatus>) -> MbsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MbsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            MbsStatus::Panic
        }
    }
}

fn fail(e: Error) -> MbsStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null_arg(name: &str) -> MbsStatus {
    set_error(format!("`{name}` is null"));
    MbsStatus::NullPointer
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, MbsStatus> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        MbsStatus::InvalidArgument
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, MbsStatus> {
    p.as_mut().ok_or_else(|| null_arg(name))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, MbsStatus> {
    p.as_ref().ok_or_else(|| null_arg(name))
}

fn problem(p: MbsProblem) -> Problem {
    match p {
        MbsProblem::Stefan => Problem::Stefan,
        MbsProblem::Fisher => Problem::Fisher,
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Copy of the last error message on this thread, or NULL if none.
#[no_mangle]
pub extern "C" fn mbs_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mbs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Run the built-in solver with the case defaults, overriding `kappa` and `t_end`
/// when they are positive.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free with
/// [`mbs_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn mbs_simulate(
    case_: MbsCase,
    kappa: f64,
    t_end: f64,
    seed: u64,
    out: *mut *mut MbsDataset,
) -> MbsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mut p = SimParams::for_case(match case_ {
            MbsCase::Planar => Case::Planar,
            MbsCase::Star => Case::Star,
        });
        if kappa > 0.0 {
            p.kappa = kappa;
        }
        if t_end > 0.0 {
            p.t_end = t_end;
        }
        let d = sim::simulate(&p, seed).map_err(fail)?;
        *out = Box::into_raw(Box::new(MbsDataset { inner: d }));
        Ok(())
    })
}

/// # Safety
/// `dir` must be a NUL-terminated path and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbs_dataset_read(dir: *const c_char, out: *mut *mut MbsDataset) -> MbsStatus {
    guard(|| {
        let dir = path_arg(dir, "dir")?;
        let out = out_arg(out, "out")?;
        let d = io::read_dataset(&dir).map_err(fail)?;
        *out = Box::into_raw(Box::new(MbsDataset { inner: d }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn mbs_dataset_write(dataset: *const MbsDataset, dir: *const c_char) -> MbsStatus {
    guard(|| {
        let d = ref_arg(dataset, "dataset")?;
        let dir = path_arg(dir, "dir")?;
        io::write_dataset(&dir, &d.inner).map_err(fail)
    })
}

/// New dataset with Gaussian noise of relative level `eta` added to every field value.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbs_dataset_corrupt(
    dataset: *const MbsDataset,
    eta: f64,
    seed: u64,
    out: *mut *mut MbsDataset,
) -> MbsStatus {
    guard(|| {
        let d = ref_arg(dataset, "dataset")?;
        let out = out_arg(out, "out")?;
        let noisy = sim::add_noise(&d.inner, eta, seed).map_err(fail)?;
        *out = Box::into_raw(Box::new(MbsDataset { inner: noisy }));
        Ok(())
    })
}

/// Number of stored snapshots, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbs_dataset_snapshot_count(dataset: *const MbsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.snapshots.len())
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mbs_dataset_free(dataset: *mut MbsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Ensemble discovery with the per-problem defaults. A negative `lambda1`
/// keeps the default sparsity threshold.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer; on success `out`
/// receives a handle to free with [`mbs_report_free`].
#[no_mangle]
pub unsafe extern "C" fn mbs_discover(
    dataset: *const MbsDataset,
    problem_: MbsProblem,
    lambda1: f64,
    seed: u64,
    out: *mut *mut MbsReport,
) -> MbsStatus {
    guard(|| {
        let d = ref_arg(dataset, "dataset")?;
        let out = out_arg(out, "out")?;
        let mut opts = DiscoverOptions::for_problem(problem(problem_));
        if lambda1 >= 0.0 {
            opts.lambda1 = lambda1;
        }
        opts.seed = seed;
        let r = pipeline::discover(&d.inner, &opts).map_err(fail)?;
        *out = Box::into_raw(Box::new(MbsReport { inner: r.report }));
        Ok(())
    })
}

/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbs_report_from_toml(toml: *const c_char, out: *mut *mut MbsReport) -> MbsStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null_arg("toml"));
        }
        let out = out_arg(out, "out")?;
        let text = CStr::from_ptr(toml).to_str().map_err(|_| {
            set_error("report text is not valid UTF-8".into());
            MbsStatus::InvalidArgument
        })?;
        let r = DiscoveryReport::from_toml(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(MbsReport { inner: r }));
        Ok(())
    })
}

/// Serialized report; free with [`mbs_string_free`]. NULL on failure.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbs_report_to_toml(report: *const MbsReport) -> *mut c_char {
    let Some(r) = report.as_ref() else {
        null_arg("report");
        return ptr::null_mut();
    };
    match r.inner.to_toml() {
        Ok(s) => into_c_string(s),
        Err(e) => {
            fail(e);
            ptr::null_mut()
        }
    }
}

/// Rendered model such as `d(xi_n)/dt = -0.514 * u_xn`; free with [`mbs_string_free`].
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbs_report_equation(report: *const MbsReport) -> *mut c_char {
    report.as_ref().map_or(ptr::null_mut(), |r| into_c_string(r.inner.equation.clone()))
}

/// Number of library features, or 0 for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbs_report_feature_count(report: *const MbsReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.coefficients.len())
}

/// Copy up to `len` final coefficients, in library order, into `buf`.
/// `written` receives the full count.
///
/// # Safety
/// `buf` must hold `len` doubles; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mbs_report_coefficients(
    report: *const MbsReport,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> MbsStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let c = &r.inner.coefficients;
        if len > 0 {
            if buf.is_null() {
                return Err(null_arg("buf"));
            }
            ptr::copy_nonoverlapping(c.as_ptr(), buf, len.min(c.len()));
        }
        if let Some(w) = written.as_mut() {
            *w = c.len();
        }
        Ok(())
    })
}

/// Relative coefficient error against the dataset's ground truth.
/// Fails with `MBS_STATUS_NO_MODEL` when the report carries none.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbs_report_epsilon_c(report: *const MbsReport, out: *mut f64) -> MbsStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let out = out_arg(out, "out")?;
        match r.inner.epsilon_c {
            Some(e) => {
                *out = e;
                Ok(())
            }
            None => {
                set_error("report has no ground-truth error".into());
                Err(MbsStatus::NoModel)
            }
        }
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mbs_report_free(report: *mut MbsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Replay a report to `t_target`. Stefan reports yield the area of the
/// uncertainty band; Fisher reports yield the largest field deviation.
///
/// # Safety
/// `dataset` and `report` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbs_replay(
    dataset: *const MbsDataset,
    report: *const MbsReport,
    t_target: f64,
    out: *mut f64,
) -> MbsStatus {
    guard(|| {
        let d = ref_arg(dataset, "dataset")?;
        let r = ref_arg(report, "report")?;
        let out = out_arg(out, "out")?;
        *out = match pipeline::replay(&d.inner, &r.inner, t_target).map_err(fail)? {
            Replay::Boundary(b) => b.area,
            Replay::Field(f) => f.max_error,
        };
        Ok(())
    })
}

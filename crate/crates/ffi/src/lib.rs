//! C interface to `fcs-core`.
//!
//! Every function returns an [`FcsStatus`]; on failure a message is kept in
//! thread-local storage and can be read with [`fcs_last_error_message`].
//! Objects are opaque handles released with their `_free` function. Strings
//! returned through out-parameters are released with [`fcs_string_free`].
//! Numeric arrays crossing this boundary use internal units (radians);
//! files written by [`fcs_trace_write_csv`] use the study's output units.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fcs_core::cli::{pattern_margins, MarginJson};
use fcs_core::config::{load_config, DesignRecord, Study, StudyConfig};
use fcs_core::controller::{decide, ControllerMode};
use fcs_core::margins::DeltaPattern;
use fcs_core::numerics::RealVector;
use fcs_core::simulate::{run, SimTrace};
use fcs_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    BufferTooSmall = 4,
    Config = 10,
    Io = 11,
    Dimension = 12,
    NonFinite = 13,
    Numerical = 14,
    Model = 15,
    Design = 16,
    Exclusivity = 17,
    Simulation = 18,
    Panic = 99,
}

/// Values for the `mode` argument of [`fcs_simulate`] and [`fcs_decide`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcsMode {
    Baseline = 0,
    Saturation = 1,
    Augmented = 2,
    AwOnly = 3,
}

fn mode_arg(mode: i32) -> Result<ControllerMode, Failure> {
    Ok(match mode {
        m if m == FcsMode::Baseline as i32 => ControllerMode::Baseline,
        m if m == FcsMode::Saturation as i32 => ControllerMode::HardSaturation,
        m if m == FcsMode::Augmented as i32 => ControllerMode::Augmented,
        m if m == FcsMode::AwOnly as i32 => ControllerMode::AwOnly,
        m => return Err(fail(FcsStatus::InvalidArgument, format!("unknown mode {m}"))),
    })
}

/// Loaded and validated study.
pub struct FcsStudy {
    study: Study,
}

/// Simulation result bound to the study that produced it.
pub struct FcsTrace {
    trace: SimTrace,
    units: fcs_core::units::SignalUnits,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(FcsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            "config" => FcsStatus::Config,
            "io" => FcsStatus::Io,
            "dimension" => FcsStatus::Dimension,
            "non_finite" => FcsStatus::NonFinite,
            "model" => FcsStatus::Model,
            "design" => FcsStatus::Design,
            "exclusivity" => FcsStatus::Exclusivity,
            "simulation" => FcsStatus::Simulation,
            _ => FcsStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: FcsStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FcsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FcsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            FcsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(FcsStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(FcsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(FcsStatus::NullPointer, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(FcsStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(fail(FcsStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no nul bytes").into_raw()
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fcs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a study from a JSON configuration file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcs_study_load(path: *const c_char, out: *mut *mut FcsStudy) -> FcsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let study = load_config(path)?;
        *out = Box::into_raw(Box::new(FcsStudy { study }));
        Ok(())
    })
}

/// Builds a study from JSON text. A null `json` loads the bundled lateral
/// aircraft scenario.
///
/// # Safety
/// `json` must be null or a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcs_study_from_json(json: *const c_char, out: *mut *mut FcsStudy) -> FcsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let cfg = if json.is_null() {
            StudyConfig::aircraft_lateral()
        } else {
            StudyConfig::from_json(str_arg(json, "json")?)?
        };
        let study = Study::try_from(cfg)?;
        *out = Box::into_raw(Box::new(FcsStudy { study }));
        Ok(())
    })
}

/// # Safety
/// `study` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn fcs_study_free(study: *mut FcsStudy) {
    if !study.is_null() {
        drop(Box::from_raw(study));
    }
}

/// Plant state count, input count and extended state count.
///
/// # Safety
/// `study` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcs_study_dims(
    study: *const FcsStudy,
    n_p: *mut usize,
    m: *mut usize,
    n: *mut usize,
) -> FcsStatus {
    guard(|| {
        let s = &ref_arg(study, "study")?.study;
        out_arg(n_p, "n_p")?;
        out_arg(m, "m")?;
        out_arg(n, "n")?;
        *n_p = s.sys.plant.n_p();
        *m = s.m();
        *n = s.sys.n();
        Ok(())
    })
}

/// Design record as JSON.
///
/// # Safety
/// `study` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcs_design_json(study: *const FcsStudy, out: *mut *mut c_char) -> FcsStatus {
    guard(|| {
        let s = &ref_arg(study, "study")?.study;
        out_arg(out, "out")?;
        *out = into_c_string(DesignRecord::from_study(s)?.to_json());
        Ok(())
    })
}

/// MIMO margin report for an activity pattern such as `"0100"`. A null
/// pattern means no channel active.
///
/// # Safety
/// `study` must be a live handle; `pattern` null or nul-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fcs_margins_json(
    study: *const FcsStudy,
    pattern: *const c_char,
    out: *mut *mut c_char,
) -> FcsStatus {
    guard(|| {
        let s = &ref_arg(study, "study")?.study;
        out_arg(out, "out")?;
        let pattern = if pattern.is_null() {
            DeltaPattern::inactive(s.m())
        } else {
            str_arg(pattern, "pattern")?.parse()?
        };
        let report = pattern_margins(s, &pattern)?;
        let json = serde_json::to_string_pretty(&MarginJson::from(&report))
            .map_err(|e| fail(FcsStatus::Numerical, e.to_string()))?;
        *out = into_c_string(json);
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn fcs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the study's command schedule with the given controller.
///
/// # Safety
/// `study` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcs_simulate(study: *const FcsStudy, mode: i32, out: *mut *mut FcsTrace) -> FcsStatus {
    guard(|| {
        let s = &ref_arg(study, "study")?.study;
        out_arg(out, "out")?;
        let trace = run(&s.sys, &s.schedule, &s.sim_config(mode_arg(mode)?))?;
        *out = Box::into_raw(Box::new(FcsTrace {
            trace,
            units: s.units.clone(),
        }));
        Ok(())
    })
}

/// Number of samples in a trace, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fcs_trace_len(trace: *const FcsTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.len())
}

/// Copies one channel of a signal (`t`, `x_p`, `e_yi`, `u_bl`, `v`, `w`,
/// `u_total`, `y_reg`, `z_lim`, `delta`, `y_cmd`) into `buf`. `buf_len` must
/// be at least [`fcs_trace_len`].
///
/// # Safety
/// `trace` must be a live handle; `name` nul-terminated; `buf` writable for
/// `buf_len` values.
#[no_mangle]
pub unsafe extern "C" fn fcs_trace_copy_signal(
    trace: *const FcsTrace,
    name: *const c_char,
    channel: usize,
    buf: *mut f64,
    buf_len: usize,
) -> FcsStatus {
    guard(|| {
        let t = &ref_arg(trace, "trace")?.trace;
        let name = str_arg(name, "name")?;
        out_arg(buf, "buf")?;
        let values = t
            .signal(name, channel)
            .ok_or_else(|| fail(FcsStatus::InvalidArgument, format!("no signal {name}[{channel}]")))?;
        if buf_len < values.len() {
            return Err(fail(
                FcsStatus::BufferTooSmall,
                format!("buffer holds {buf_len} values, need {}", values.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, values.len()).copy_from_slice(&values);
        Ok(())
    })
}

/// Writes the trace as CSV in output units.
///
/// # Safety
/// `trace` must be a live handle; `path` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn fcs_trace_write_csv(trace: *const FcsTrace, path: *const c_char) -> FcsStatus {
    guard(|| {
        let t = ref_arg(trace, "trace")?;
        let path = str_arg(path, "path")?;
        let io = |e: std::io::Error| fail(FcsStatus::Io, format!("{path}: {e}"));
        let file = File::create(path).map_err(io)?;
        t.trace.write_csv(file, Some(&t.units)).map_err(io)
    })
}

/// # Safety
/// `trace` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn fcs_trace_free(trace: *mut FcsTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// One controller evaluation at extended state `x = [e_yI; x_p]` (length n)
/// and command `y_cmd` (length m). Writes the applied input to `u_out`
/// (length m) and, when `delta_out` is non-null, the activity flags of the
/// 2m limited channels as 0/1.
///
/// # Safety
/// `study` must be a live handle; arrays must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fcs_decide(
    study: *const FcsStudy,
    mode: i32,
    x: *const f64,
    x_len: usize,
    y_cmd: *const f64,
    y_len: usize,
    u_out: *mut f64,
    u_len: usize,
    delta_out: *mut u8,
) -> FcsStatus {
    guard(|| {
        let s = &ref_arg(study, "study")?.study;
        let x = RealVector::from_column_slice(slice_arg(x, x_len, "x")?);
        let y = RealVector::from_column_slice(slice_arg(y_cmd, y_len, "y_cmd")?);
        out_arg(u_out, "u_out")?;
        let d = decide(mode_arg(mode)?, &s.sys, &x, &y)?;
        if u_len < d.u_total.len() {
            return Err(fail(FcsStatus::BufferTooSmall, format!("u_out holds {u_len}, need {}", d.u_total.len())));
        }
        std::slice::from_raw_parts_mut(u_out, d.u_total.len()).copy_from_slice(d.u_total.as_slice());
        if !delta_out.is_null() {
            let flags = std::slice::from_raw_parts_mut(delta_out, d.delta.len());
            for (f, a) in flags.iter_mut().zip(&d.delta) {
                *f = u8::from(*a);
            }
        }
        Ok(())
    })
}

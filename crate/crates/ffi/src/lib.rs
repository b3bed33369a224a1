//! C ABI over `hapsim`.
//!
//! Scenarios and run results are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`HapsimStatus`]; on failure `hapsim_last_error()` describes the problem
//! (per thread, valid until the next failing call on that thread). Strings
//! returned as `char *` are owned by the caller and released with
//! `hapsim_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hapsim::cli::write_outputs;
use hapsim::scenario_file::{parse_with_overrides, to_text, Override};
use hapsim::{Error, RunOutput, Scenario};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HapsimStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// Scenario text or values were rejected.
    InvalidScenario = 4,
    ParseError = 5,
    EncodingOverflow = 6,
    /// The requested value is not available for this run.
    InsufficientData = 7,
    Io = 8,
    /// A metric name that the report does not contain.
    UnknownMetric = 9,
    /// Internal failure; the library caught a panic.
    Internal = 10,
}

/// Parsed scenario.
pub struct HapsimScenario {
    inner: Scenario,
}

/// Finished simulation run.
pub struct HapsimResult {
    inner: RunOutput,
    csv: Vec<(String, String)>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: HapsimStatus, msg: impl Into<String>) -> HapsimStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> HapsimStatus {
    let status = match &e {
        Error::InvalidArgument(_) => HapsimStatus::InvalidArgument,
        Error::EncodingOverflow { .. } => HapsimStatus::EncodingOverflow,
        Error::Parse { .. } => HapsimStatus::ParseError,
        Error::InsufficientData(_) => HapsimStatus::InsufficientData,
        Error::InvalidScenario(_) | Error::ScenarioFile { .. } => HapsimStatus::InvalidScenario,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), HapsimStatus>) -> HapsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HapsimStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(HapsimStatus::Internal, "internal error"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, HapsimStatus> {
    if p.is_null() {
        return Err(fail(HapsimStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HapsimStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, HapsimStatus> {
    p.as_ref()
        .ok_or_else(|| fail(HapsimStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), HapsimStatus> {
    if p.is_null() {
        Err(fail(HapsimStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message for the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hapsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn hapsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses scenario text into `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hapsim_scenario_parse(
    text: *const c_char,
    out: *mut *mut HapsimScenario,
) -> HapsimStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let text = str_arg(text, "text")?;
        let inner = parse_with_overrides(text, &[]).map_err(from_error)?;
        *out = Box::into_raw(Box::new(HapsimScenario { inner }));
        Ok(())
    })
}

/// Reads and parses the scenario file at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hapsim_scenario_load(
    path: *const c_char,
    out: *mut *mut HapsimScenario,
) -> HapsimStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = str_arg(path, "path")?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| fail(HapsimStatus::Io, format!("{path}: {e}")))?;
        let inner = parse_with_overrides(&text, &[]).map_err(from_error)?;
        *out = Box::into_raw(Box::new(HapsimScenario { inner }));
        Ok(())
    })
}

/// Applies one `section.key=value` override. On failure the scenario is
/// left unchanged.
///
/// # Safety
/// `scenario` must come from this library; `assignment` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hapsim_scenario_override(
    scenario: *mut HapsimScenario,
    assignment: *const c_char,
) -> HapsimStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or_else(|| fail(HapsimStatus::NullPointer, "scenario is null"))?;
        let o: Override = str_arg(assignment, "assignment")?
            .parse()
            .map_err(from_error)?;
        s.inner = parse_with_overrides(&to_text(&s.inner), &[o]).map_err(from_error)?;
        Ok(())
    })
}

/// Canonical text of the scenario. Free with `hapsim_string_free`.
///
/// # Safety
/// `scenario` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hapsim_scenario_to_text(
    scenario: *const HapsimScenario,
    out: *mut *mut c_char,
) -> HapsimStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let s = handle(scenario, "scenario")?;
        *out = owned_string(to_text(&s.inner));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library (or be null) and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn hapsim_scenario_free(scenario: *mut HapsimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the simulation to completion.
///
/// # Safety
/// `scenario` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hapsim_run(
    scenario: *const HapsimScenario,
    out: *mut *mut HapsimResult,
) -> HapsimStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let s = handle(scenario, "scenario")?;
        let inner = hapsim::run(&s.inner).map_err(from_error)?;
        let csv = inner
            .report
            .to_csv()
            .lines()
            .skip(1)
            .filter_map(|l| l.split_once(','))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        *out = Box::into_raw(Box::new(HapsimResult { inner, csv }));
        Ok(())
    })
}

/// Looks up a report metric by its report.csv name, e.g.
/// `total_pps_avg` or `divergence_rms.client1`.
///
/// # Safety
/// `result` must come from this library, `name` be a NUL-terminated string
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hapsim_result_metric(
    result: *const HapsimResult,
    name: *const c_char,
    out: *mut f64,
) -> HapsimStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let r = handle(result, "result")?;
        let name = str_arg(name, "name")?;
        let (_, value) = r
            .csv
            .iter()
            .find(|(k, _)| k == name)
            .ok_or_else(|| fail(HapsimStatus::UnknownMetric, format!("no metric `{name}`")))?;
        *out = value.parse().map_err(|_| {
            fail(HapsimStatus::InsufficientData, format!("`{name}` is not available ({value})"))
        })?;
        Ok(())
    })
}

/// Number of packets offered to the channels during the run.
///
/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hapsim_result_packet_count(result: *const HapsimResult) -> u64 {
    result.as_ref().map_or(0, |r| r.inner.packets.len() as u64)
}

/// The report as CSV (`metric,value` lines). Free with `hapsim_string_free`.
///
/// # Safety
/// `result` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hapsim_result_report_csv(
    result: *const HapsimResult,
    out: *mut *mut c_char,
) -> HapsimStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = owned_string(handle(result, "result")?.inner.report.to_csv());
        Ok(())
    })
}

/// The report as a text table. Free with `hapsim_string_free`.
///
/// # Safety
/// `result` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hapsim_result_report_table(
    result: *const HapsimResult,
    out: *mut *mut c_char,
) -> HapsimStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = owned_string(handle(result, "result")?.inner.report.to_table());
        Ok(())
    })
}

/// Writes the same files as `hapsim run` into `dir`.
///
/// # Safety
/// Handles must come from this library; `dir` must be a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn hapsim_result_write(
    result: *const HapsimResult,
    scenario: *const HapsimScenario,
    dir: *const c_char,
) -> HapsimStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let s = handle(scenario, "scenario")?;
        let dir = str_arg(dir, "dir")?;
        write_outputs(Path::new(dir), &s.inner, &r.inner)
            .map_err(|e| fail(HapsimStatus::Io, format!("{dir}: {e}")))
    })
}

/// # Safety
/// `result` must come from this library (or be null) and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn hapsim_result_free(result: *mut HapsimResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `s` must be a string returned by this library (or null).
#[no_mangle]
pub unsafe extern "C" fn hapsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Rounds `value` to the nearest multiple of `quantum`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hapsim_quantize(value: f64, quantum: f64, out: *mut f64) -> HapsimStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = hapsim::state::quantize(value, quantum).map_err(from_error)?;
        Ok(())
    })
}

/// Bandwidth in kbit/s for a packet rate and average packet size in bytes.
#[no_mangle]
pub extern "C" fn hapsim_bandwidth_kbps(pps: f64, avg_packet_bytes: f64) -> f64 {
    hapsim::metrics::bandwidth_kbps(pps, avg_packet_bytes)
}

//! C ABI for the nrtwin simulator, closed loop and delay predictor.
//!
//! Objects cross the boundary as opaque pointers created by `*_new`/`*_parse`
//! style functions and released by the matching `*_free`. Every fallible
//! call returns an `NrtStatus`; on failure a message is kept per thread
//! and can be read with `nrt_last_error`. Strings returned to the caller
//! are owned by the caller and must be released with `nrt_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nrtwin::cli::Scenario;
use nrtwin::netsim::{tti_duration, KeyValues, Network, UeId};
use nrtwin::predictor::BoostedEnsemble;
use nrtwin::telemetry::{FeatureVector, FEATURE_COUNT};
use nrtwin::twin::{closed_loop, Policy, RunReport};
use nrtwin::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Runtime = 4,
    Io = 5,
    Panic = 6,
}

/// Number of entries in a feature vector passed to `nrt_model_predict`.
pub const NRT_FEATURE_COUNT: usize = 11;
const _: () = assert!(NRT_FEATURE_COUNT == FEATURE_COUNT);

/// A parsed scenario file.
pub struct NrtConfig {
    scenario: Scenario,
}

/// The report of one scenario run.
pub struct NrtResult {
    report: RunReport,
}

/// A trained delay predictor.
pub struct NrtModel {
    model: BoostedEnsemble,
}

/// Aggregate KPIs; throughput is in bits per second.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NrtKpi {
    pub mean_delay_s: f64,
    pub throughput_bps: f64,
    pub success_ratio: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NrtStatus {
    match e {
        Error::Io { .. } => NrtStatus::Io,
        e if e.is_config() => NrtStatus::Config,
        _ => NrtStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NrtStatus, String)>) -> NrtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NrtStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NrtStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NrtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NrtStatus, String) {
    (NrtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NrtStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (NrtStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn nrt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nrt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Slot length in seconds of numerology `mu` (0 to 4).
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn nrt_tti_duration(mu: i32, out: *mut f64) -> NrtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = tti_duration(mu as i64).map_err(lib_err)?;
        Ok(())
    })
}

/// Parses a scenario in `key = value` form.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrt_config_parse(text: *const c_char, out: *mut *mut NrtConfig) -> NrtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let mut kv = KeyValues::parse(text).map_err(lib_err)?;
        let scenario = Scenario::from_kv(&mut kv).map_err(lib_err)?;
        kv.finish().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NrtConfig { scenario }));
        Ok(())
    })
}

/// Replaces the scenario seed.
///
/// # Safety
/// `config` must come from `nrt_config_parse`.
#[no_mangle]
pub unsafe extern "C" fn nrt_config_set_seed(config: *mut NrtConfig, seed: u64) -> NrtStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        c.scenario.sim.seed = seed;
        c.scenario.pipeline.twin.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must come from `nrt_config_parse` or be null.
#[no_mangle]
pub unsafe extern "C" fn nrt_config_free(config: *mut NrtConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the scenario under its configured policy.
///
/// # Safety
/// `config` must come from `nrt_config_parse` and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn nrt_simulate(config: *const NrtConfig, out: *mut *mut NrtResult) -> NrtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = &config.as_ref().ok_or_else(|| null("config"))?.scenario;
        let net = Network::build(&s.sim).map_err(lib_err)?;
        let what_if = s.what_if(&net);
        let policy = if s.policy_dt {
            let mut t = s.pipeline.twin.clone();
            if let Some(p) = &s.model {
                t.pretrained = Some(BoostedEnsemble::load(p).map_err(lib_err)?);
            }
            Policy::DtManaged(Box::new(t))
        } else {
            Policy::Default
        };
        let report = closed_loop(&s.sim, &what_if, &policy).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NrtResult { report }));
        Ok(())
    })
}

/// Whole-run KPIs over victims.
///
/// # Safety
/// `result` must come from `nrt_simulate` and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn nrt_result_network_kpi(result: *const NrtResult, out: *mut NrtKpi) -> NrtStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let k = r.report.result.network;
        *out = NrtKpi {
            mean_delay_s: k.mean_delay,
            throughput_bps: k.mean_throughput * 8.0,
            success_ratio: k.success_ratio,
        };
        Ok(())
    })
}

/// Number of UEs in the result, attacker included.
///
/// # Safety
/// `result` must come from `nrt_simulate` and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn nrt_result_ue_count(result: *const NrtResult, out: *mut usize) -> NrtStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = r.report.result.per_ue.len();
        Ok(())
    })
}

/// Whole-run KPIs of one UE.
///
/// # Safety
/// `result` must come from `nrt_simulate` and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn nrt_result_ue_kpi(result: *const NrtResult, ue_id: u32, out: *mut NrtKpi) -> NrtStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let k = r
            .report
            .result
            .per_ue
            .get(&UeId(ue_id))
            .ok_or_else(|| (NrtStatus::Runtime, format!("lookup error: no UE {ue_id}")))?;
        *out = NrtKpi {
            mean_delay_s: k.mean_delay,
            throughput_bps: k.throughput * 8.0,
            success_ratio: k.success_ratio,
        };
        Ok(())
    })
}

/// KPI time series as CSV; release with `nrt_string_free`.
///
/// # Safety
/// `result` must come from `nrt_simulate` and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn nrt_result_csv(result: *const NrtResult, out: *mut *mut c_char) -> NrtStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(r.report.to_csv());
        Ok(())
    })
}

/// # Safety
/// `result` must come from `nrt_simulate` or be null.
#[no_mangle]
pub unsafe extern "C" fn nrt_result_free(result: *mut NrtResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Loads a model written by `nrtwin train`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrt_model_load(path: *const c_char, out: *mut *mut NrtModel) -> NrtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let model = BoostedEnsemble::load(path).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NrtModel { model }));
        Ok(())
    })
}

/// Parses a model from its text form.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrt_model_parse(text: *const c_char, out: *mut *mut NrtModel) -> NrtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let model = nrtwin::predictor::from_text(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NrtModel { model }));
        Ok(())
    })
}

/// Predicted delay in seconds for `len` (= `NRT_FEATURE_COUNT`) features
/// in telemetry column order.
///
/// # Safety
/// `model` must come from a model constructor, `features` must point to
/// `len` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn nrt_model_predict(
    model: *const NrtModel,
    features: *const f64,
    len: usize,
    out: *mut f64,
) -> NrtStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if features.is_null() {
            return Err(null("features"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if len != FEATURE_COUNT {
            return Err((
                NrtStatus::Config,
                format!("expected {FEATURE_COUNT} features, got {len}"),
            ));
        }
        let mut v = [0.0; FEATURE_COUNT];
        v.copy_from_slice(std::slice::from_raw_parts(features, len));
        *out = m.model.predict(&FeatureVector::from_array(v));
        Ok(())
    })
}

/// # Safety
/// `model` must come from a model constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn nrt_model_free(model: *mut NrtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be a string returned by this library or null.
#[no_mangle]
pub unsafe extern "C" fn nrt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

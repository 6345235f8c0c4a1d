use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use nrtwin_ffi::*;

fn last_error() -> String {
    let p = nrt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> (NrtStatus, *mut NrtConfig) {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { nrt_config_parse(c.as_ptr(), &mut cfg) };
    (s, cfg)
}

#[test]
fn tti_through_the_abi() {
    let mut v = 0.0;
    assert_eq!(unsafe { nrt_tti_duration(0, &mut v) }, NrtStatus::Ok);
    assert_eq!(v, 0.001);
    assert!(nrt_last_error().is_null());
    assert_eq!(unsafe { nrt_tti_duration(-1, &mut v) }, NrtStatus::Config);
    assert!(last_error().contains("numerology"));
    assert_eq!(unsafe { nrt_tti_duration(0, ptr::null_mut()) }, NrtStatus::NullPointer);
}

#[test]
fn simulate_and_read_back() {
    let (s, cfg) = parse("ue_count = 4\nduration_s = 0.3\nseed = 2\n");
    assert_eq!(s, NrtStatus::Ok);
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { nrt_simulate(cfg, &mut res) }, NrtStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { nrt_result_ue_count(res, &mut n) }, NrtStatus::Ok);
    assert_eq!(n, 4);
    let mut k = NrtKpi::default();
    assert_eq!(unsafe { nrt_result_ue_kpi(res, 0, &mut k) }, NrtStatus::Ok);
    assert!(k.throughput_bps > 0.0);
    assert_eq!(unsafe { nrt_result_ue_kpi(res, 9, &mut k) }, NrtStatus::Runtime);
    assert!(last_error().contains("9"));
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { nrt_result_csv(res, &mut csv) }, NrtStatus::Ok);
    let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_owned();
    assert!(text.starts_with("time_s,scope,ue_id,mean_delay_s,throughput_bps,success_ratio\n"));

    // same seed, same bytes
    let mut res2 = ptr::null_mut();
    assert_eq!(unsafe { nrt_simulate(cfg, &mut res2) }, NrtStatus::Ok);
    let mut csv2 = ptr::null_mut();
    unsafe { nrt_result_csv(res2, &mut csv2) };
    assert_eq!(unsafe { CStr::from_ptr(csv2) }.to_str().unwrap(), text);
    assert_eq!(unsafe { nrt_config_set_seed(cfg, 3) }, NrtStatus::Ok);
    unsafe {
        nrt_string_free(csv);
        nrt_string_free(csv2);
        nrt_result_free(res);
        nrt_result_free(res2);
        nrt_config_free(cfg);
        nrt_config_free(ptr::null_mut());
    }
}

#[test]
fn config_errors_carry_lines() {
    let (s, cfg) = parse("ue_count = 4\nduration_s = 1\nwat = 3\n");
    assert_eq!(s, NrtStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("line 3"), "{}", last_error());
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { nrt_config_parse(ptr::null(), &mut out) }, NrtStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { nrt_config_parse(bad.as_ptr().cast(), &mut out) }, NrtStatus::InvalidUtf8);
}

#[test]
fn model_round_trip_and_predict() {
    let text = CString::new("nrtwin-gbdt 1\nbase_score 0.5\nlearning_rate 0.1\ntrees 1\ntree 3\nsplit 6 1.5\nleaf -1\nleaf 1\n").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { nrt_model_parse(text.as_ptr(), &mut m) }, NrtStatus::Ok);
    let mut x = [0.0f64; NRT_FEATURE_COUNT];
    let mut y = 0.0;
    assert_eq!(unsafe { nrt_model_predict(m, x.as_ptr(), x.len(), &mut y) }, NrtStatus::Ok);
    assert_eq!(y, 0.5 - 0.1);
    x[6] = 4.0;
    unsafe { nrt_model_predict(m, x.as_ptr(), x.len(), &mut y) };
    assert_eq!(y, 0.5 + 0.1);
    assert_eq!(unsafe { nrt_model_predict(m, x.as_ptr(), 3, &mut y) }, NrtStatus::Config);
    unsafe { nrt_model_free(m) };

    let missing = CString::new("/nonexistent/model.txt").unwrap();
    assert_eq!(unsafe { nrt_model_load(missing.as_ptr(), &mut m) }, NrtStatus::Io);
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("nrtwin.h")
}

#[test]
fn header_declares_the_abi() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct NrtConfig NrtConfig;",
        "NRT_STATUS_OK = 0",
        "nrt_simulate",
        "nrt_model_predict",
        "nrt_last_error",
        "nrt_string_free",
        "NRT_FEATURE_COUNT 11",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

/// Builds tests/c/smoke.c against the generated header and the static
/// library of this build, then runs it.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libnrtwin_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 0.1.0"));
}

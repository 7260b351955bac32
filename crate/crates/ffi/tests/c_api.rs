use std::ffi::{CStr, CString};
use std::ptr;

use levycert_ffi::*;

fn last_error() -> String {
    let p = lc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(lc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn w1_formula_through_the_abi() {
    let mut out = LcW1Constants { c1: 0.0, c2: 0.0, big_c: 0.0, lambda: 0.0 };
    assert_eq!(unsafe { lc_w1_formula(1.0, 2.0, 0.0, &mut out) }, LcStatus::Ok);
    assert_eq!(out.c2, 0.5);
    assert!((out.big_c - 1.8591409142295226).abs() < 1e-14);
    assert!((out.lambda - 0.13447071068499756).abs() < 1e-15);
    assert_eq!(unsafe { lc_w1_formula(-1.0, 2.0, 0.0, &mut out) }, LcStatus::InvalidArgument);
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(unsafe { lc_w1_formula(1.0, 1.0, 0.0, ptr::null_mut()) }, LcStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { lc_certify(ptr::null(), LcCertKind::W1, 0.0, ptr::null_mut()) }, LcStatus::NullPointer);
    assert_eq!(unsafe { lc_curve_len(ptr::null()) }, 0);
    unsafe {
        lc_scenario_free(ptr::null_mut());
        lc_certificate_free(ptr::null_mut());
        lc_curve_free(ptr::null_mut());
        lc_string_free(ptr::null_mut());
    }
}

#[test]
fn degenerate_certificate_from_catalog() {
    assert_eq!(lc_catalog_len(), 6);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lc_scenario_catalog(0, &mut s) }, LcStatus::Ok);
    let name = unsafe { lc_scenario_name(s) };
    assert_eq!(unsafe { CStr::from_ptr(name) }.to_str().unwrap(), "dissipative_truncated");
    unsafe { lc_string_free(name) };

    let mut cert = ptr::null_mut();
    assert_eq!(unsafe { lc_certify(s, LcCertKind::W1, 0.0, &mut cert) }, LcStatus::Ok);
    let mut v = LcCertificateValues {
        c1: 0.0,
        c2: 0.0,
        big_c: 0.0,
        lambda: 0.0,
        kappa: 0.0,
        a: 0.0,
        j_kappa: 0.0,
        verified: false,
        conditional: false,
    };
    assert_eq!(unsafe { lc_certificate_values(cert, &mut v) }, LcStatus::Ok);
    assert_eq!((v.big_c, v.lambda), (1.0, 1.0));
    assert!(v.verified && v.a.is_nan());
    let prov = unsafe { lc_certificate_provenance(cert) };
    assert!(!unsafe { CStr::from_ptr(prov) }.to_bytes().is_empty());
    unsafe { lc_string_free(prov) };

    let mut tv = ptr::null_mut();
    assert_eq!(unsafe { lc_certify(s, LcCertKind::Tv, 0.0, &mut tv) }, LcStatus::Rejected);
    assert!(tv.is_null());
    unsafe {
        lc_certificate_free(cert);
        lc_scenario_free(s);
    }
}

#[test]
fn config_errors_name_the_key() {
    let text = CString::new(
        "scenario.a.drift.kind = nope\nscenario.a.noise.kind = isotropic_stable\nscenario.a.x0 = 1\nscenario.a.y0 = 0",
    )
    .unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lc_scenario_from_config(text.as_ptr(), 0, &mut s) }, LcStatus::Config);
    assert!(last_error().contains("scenario.a.drift.kind"));
}

#[test]
fn synchronous_curve_is_deterministic_decay() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lc_scenario_catalog(0, &mut s) }, LcStatus::Ok);
    let settings = LcSimSettings {
        kappa: 0.0,
        epsilon: 0.05,
        step: 0.001,
        t_max: 1.0,
        n_paths: 4,
        seed: 1,
        record_every: 100,
        synchronous: true,
        workers: 1,
    };
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { lc_simulate_curve(s, &settings, LcCurveKind::W1, &mut c) }, LcStatus::Ok);
    assert_eq!(unsafe { lc_curve_len(c) }, 11);
    let (mut t, mut v, mut se) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { lc_curve_point(c, 10, &mut t, &mut v, &mut se) }, LcStatus::Ok);
    assert!((t - 1.0).abs() < 1e-12);
    assert!((v - (-1.0f64).exp()).abs() < 10.0 * 0.001, "{v}");
    assert!(se < 1e-12);
    assert_eq!(unsafe { lc_curve_point(c, 11, &mut t, ptr::null_mut(), ptr::null_mut()) }, LcStatus::InvalidArgument);
    unsafe {
        lc_curve_free(c);
        lc_scenario_free(s);
    }
}

#[test]
fn birth_death_survival_buffer() {
    let times = [0.0, 1e-4];
    let mut out = [f64::NAN; 2];
    assert_eq!(unsafe { lc_birth_death_survival(2.0, 1, times.as_ptr(), 2, out.as_mut_ptr()) }, LcStatus::Ok);
    assert_eq!(out[0], 1.0);
    assert!((out[1] - (1.0 - 1e-4)).abs() < 1e-7);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/levycert.h")).unwrap();
    for sym in [
        "lc_last_error",
        "lc_string_free",
        "lc_scenario_catalog",
        "lc_certify",
        "lc_simulate_curve",
        "lc_birth_death_survival",
        "typedef struct LcScenario LcScenario",
        "LC_STATUS_PANIC",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

use std::ffi::CString;
use std::ptr;

use hardy_lab_ffi::*;

fn params(n: usize, mu: f64) -> *mut HlParams {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { hl_params_new(n, mu, &mut p) }, HlStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let len = unsafe { hl_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; len + 1];
    unsafe { hl_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { std::ffi::CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn constants_at_the_reference_point() {
    let p = params(3, 0.25);
    let mut c = std::mem::MaybeUninit::<HlConstants>::uninit();
    assert_eq!(unsafe { hl_constants(p, 1.2, c.as_mut_ptr()) }, HlStatus::Ok);
    let c = unsafe { c.assume_init() };
    assert_eq!(c.alpha, 0.5);
    assert!((c.q_crit - 1.4).abs() < 1e-15);
    assert!((c.gamma1 / 11533007.8125 - 1.0).abs() < 1e-12);
    assert!(c.subcritical);

    let mut c = std::mem::MaybeUninit::<HlConstants>::uninit();
    assert_eq!(unsafe { hl_constants(p, 1.45, c.as_mut_ptr()) }, HlStatus::Ok);
    let c = unsafe { c.assume_init() };
    assert!(c.gamma1.is_nan() && !c.subcritical);
    unsafe { hl_params_free(p) };
}

#[test]
fn bad_parameters_map_to_codes() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { hl_params_new(2, 0.25, &mut p) }, HlStatus::Domain);
    assert!(p.is_null());
    assert!(last_error().contains("N = 2"));
    assert_eq!(unsafe { hl_params_new(3, 0.3, &mut p) }, HlStatus::Domain);
    assert_eq!(unsafe { hl_params_new(3, 0.25, ptr::null_mut()) }, HlStatus::NullPointer);
    let mut c = std::mem::MaybeUninit::<HlConstants>::uninit();
    assert_eq!(unsafe { hl_constants(ptr::null(), 1.2, c.as_mut_ptr()) }, HlStatus::NullPointer);
}

#[test]
fn omega_round_trip() {
    let p = params(3, 0.25);
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { hl_omega_solve(p, 1.2, 200, &mut h) }, HlStatus::Ok);
    let m = unsafe { hl_omega_len(h) };
    assert_eq!(m, 200);
    let mut res = f64::NAN;
    assert_eq!(unsafe { hl_omega_residual(h, &mut res) }, HlStatus::Ok);
    assert!(res <= 1e-8);
    let (mut phi, mut omega) = (vec![0.0; m], vec![0.0; m]);
    assert_eq!(
        unsafe { hl_omega_values(h, phi.as_mut_ptr(), omega.as_mut_ptr(), m - 1) },
        HlStatus::BufferTooSmall
    );
    assert_eq!(unsafe { hl_omega_values(h, phi.as_mut_ptr(), omega.as_mut_ptr(), m) }, HlStatus::Ok);
    assert_eq!(phi[0], 0.0);
    assert!((omega[0] - 43.87).abs() < 0.05, "{}", omega[0]);
    assert_eq!(omega[m - 1], 0.0);
    unsafe { hl_omega_free(h) };

    let mut h = ptr::null_mut();
    assert_eq!(unsafe { hl_omega_solve(p, 1.45, 200, &mut h) }, HlStatus::Supercritical);
    assert!(h.is_null());
    assert_eq!(unsafe { hl_omega_len(ptr::null()) }, 0);
    unsafe { hl_params_free(p) };
}

#[test]
fn weak_solve_recovers_unit_ratio() {
    let p = params(3, 0.25);
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { hl_weak_solve(p, 1.2, 1.0, 1e-4, 121, 21, &mut h) }, HlStatus::Ok);
    let (mut lim, mut res) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { hl_weak_ratio_limit(h, &mut lim) }, HlStatus::Ok);
    assert_eq!(unsafe { hl_weak_residual(h, &mut res) }, HlStatus::Ok);
    assert!((lim - 1.0).abs() < 0.05, "{lim}");
    assert!(res < 1e-8);
    unsafe { hl_weak_free(h) };
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { hl_weak_solve(p, 1.2, 1.0, 0.0, 121, 21, &mut h) }, HlStatus::Domain);
    unsafe { hl_params_free(p) };
}

#[test]
fn classification_codes() {
    let p = params(3, 0.25);
    let mut v = std::mem::MaybeUninit::<HlVerdict>::uninit();
    assert_eq!(unsafe { hl_classify(p, 1.5, v.as_mut_ptr()) }, HlStatus::Ok);
    let v = unsafe { v.assume_init() };
    assert_eq!(v.regime, HlRegime::SupercriticalEpsilonCase);
    assert!(v.point_removable && !v.inconclusive);
    assert!((v.epsilon_upper - 1.0 / 6.0).abs() < 1e-12);

    let mut v = std::mem::MaybeUninit::<HlVerdict>::uninit();
    assert_eq!(unsafe { hl_classify(p, 1.35, v.as_mut_ptr()) }, HlStatus::Ok);
    assert_eq!(unsafe { v.assume_init() }.regime, HlRegime::Subcritical);
    assert_eq!(unsafe { hl_classify(p, 2.5, v.as_mut_ptr()) }, HlStatus::Domain);
    unsafe { hl_params_free(p) };
}

#[test]
fn suite_configuration_errors() {
    let mut passed = true;
    let bad = CString::new("r_min = 0.0").unwrap();
    assert_eq!(unsafe { hl_run_suite(bad.as_ptr(), &mut passed) }, HlStatus::Config);
    assert!(last_error().contains("r_min"));
    let unknown = CString::new("bogus = 1").unwrap();
    assert_eq!(unsafe { hl_run_suite(unknown.as_ptr(), &mut passed) }, HlStatus::Config);

    let supercritical = CString::new("q = 1.45").unwrap();
    passed = false;
    assert_eq!(unsafe { hl_run_suite(supercritical.as_ptr(), &mut passed) }, HlStatus::Ok);
    assert!(passed);
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hardy_lab.h")).unwrap();
    for name in [
        "hl_params_new",
        "hl_constants",
        "hl_omega_solve",
        "hl_omega_values",
        "hl_weak_solve",
        "hl_classify",
        "hl_run_suite",
        "hl_last_error",
        "HL_STATUS_SUPERCRITICAL",
        "typedef struct HlParams HlParams",
    ] {
        assert!(header.contains(name), "{name} missing from the header");
    }
}

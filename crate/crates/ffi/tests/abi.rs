use std::ffi::CStr;
use std::ptr;

use elg_ffi::*;

const RELIEF: [f64; 20] = [
    1.1, 1.4, 1.3, 1.7, 1.9, 1.8, 1.6, 2.2, 1.7, 2.7, 4.1, 1.8, 1.5, 1.2, 1.4, 3.0, 1.7, 2.3, 1.6, 2.0,
];

fn last_error() -> String {
    let p = elg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn relief() -> *mut ElgDataset {
    let mut ds = ptr::null_mut();
    let st = unsafe { elg_dataset_new(RELIEF.as_ptr(), RELIEF.len(), &mut ds) };
    assert_eq!(st, ElgStatus::ElgOk);
    ds
}

#[test]
fn evaluation_matches_library() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(elg_cdf_eval(2.0, 1.0, 0.5, 1.0, &mut v), ElgStatus::ElgOk);
        assert!((v - 0.334_535_332).abs() < 1e-9);
        let mut s = 0.0;
        assert_eq!(elg_survival_eval(2.0, 1.0, 0.5, 1.0, &mut s), ElgStatus::ElgOk);
        assert!((v + s - 1.0).abs() < 1e-15);
        let mut x = 0.0;
        assert_eq!(elg_quantile_eval(2.0, 1.0, 0.5, v, &mut x), ElgStatus::ElgOk);
        assert!((x - 1.0).abs() < 1e-10);
        let (mut f, mut h) = (0.0, 0.0);
        assert_eq!(elg_pdf_eval(2.0, 1.0, 0.5, 1.0, &mut f), ElgStatus::ElgOk);
        assert_eq!(elg_hazard_eval(2.0, 1.0, 0.5, 1.0, &mut h), ElgStatus::ElgOk);
        assert!((h - f / s).abs() < 1e-14);
        let mut m = 0.0;
        assert_eq!(elg_moment_eval(1.0, 1.0, 0.0, 1, &mut m), ElgStatus::ElgOk);
        assert!((m - 1.5).abs() < 1e-12);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(elg_pdf_eval(-1.0, 1.0, 0.5, 1.0, &mut v), ElgStatus::ElgErrDomain);
        assert!(last_error().contains("alpha"), "{}", last_error());
        assert_eq!(elg_quantile_eval(2.0, 1.0, 0.5, 1.5, &mut v), ElgStatus::ElgErrDomain);
        assert_eq!(elg_cdf_eval(2.0, 1.0, 0.5, 1.0, ptr::null_mut()), ElgStatus::ElgErrNullPointer);
        assert!(last_error().contains("null"));

        let mut ds = ptr::null_mut();
        let bad = [1.0, -2.0];
        assert_eq!(elg_dataset_new(bad.as_ptr(), 2, &mut ds), ElgStatus::ElgErrDomain);
        assert!(ds.is_null());
        assert_eq!(elg_dataset_new(ptr::null(), 2, &mut ds), ElgStatus::ElgErrNullPointer);

        let flat = [2.5; 4];
        assert_eq!(elg_dataset_new(flat.as_ptr(), 4, &mut ds), ElgStatus::ElgOk);
        let mut fit = ptr::null_mut();
        assert_eq!(elg_fit_newton(ds, &mut fit), ElgStatus::ElgErrDegenerateData);
        assert!(fit.is_null());
        elg_dataset_free(ds);
        elg_dataset_free(ptr::null_mut());
        elg_fit_free(ptr::null_mut());
    }
}

#[test]
fn sampling_is_seeded() {
    let mut a = vec![0.0; 500];
    let mut b = vec![0.0; 500];
    unsafe {
        assert_eq!(elg_sample_fill(2.0, 1.0, 0.5, 500, 7, a.as_mut_ptr()), ElgStatus::ElgOk);
        assert_eq!(elg_sample_fill(2.0, 1.0, 0.5, 500, 7, b.as_mut_ptr()), ElgStatus::ElgOk);
    }
    assert_eq!(a, b);
    assert!(a.iter().all(|&x| x > 0.0));
    let expected = elg::distributions::elg_sample(elg::ElgParams::new(2.0, 1.0, 0.5).unwrap(), 500, elg::Seed(7)).unwrap();
    assert_eq!(a, expected);
}

#[test]
fn relief_fit_and_tests() {
    let ds = relief();
    unsafe {
        assert_eq!(elg_dataset_len(ds), 20);
        let mut fit = ptr::null_mut();
        assert_eq!(elg_fit_newton(ds, &mut fit), ElgStatus::ElgOk);
        let (mut a, mut t, mut p, mut ll, mut conv) = (0.0, 0.0, 0.0, 0.0, false);
        assert_eq!(elg_fit_estimates(fit, &mut a, &mut t, &mut p, &mut ll, &mut conv), ElgStatus::ElgOk);
        assert!(conv);
        assert!((a - 15.5628).abs() < 5e-4 && (t - 1.5270).abs() < 5e-4 && (p - 0.9059).abs() < 5e-4);

        let mut direct = 0.0;
        assert_eq!(elg_log_likelihood(ds, a, t, p, &mut direct), ElgStatus::ElgOk);
        assert_eq!(direct, ll);

        let mut vcov = [0.0; 9];
        assert_eq!(elg_fit_vcov(fit, vcov.as_mut_ptr()), ElgStatus::ElgOk);
        assert!(vcov[0] > 0.0 && vcov[4] > 0.0 && vcov[8] > 0.0);
        assert_eq!(vcov[1], vcov[3]);

        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(elg_fit_interval(fit, 1, 0.95, &mut lo, &mut hi), ElgStatus::ElgOk);
        assert!(lo < t && t < hi);
        let half = 1.959_963_984_540_054 * vcov[4].sqrt();
        assert!((hi - lo - 2.0 * half).abs() < 1e-9);
        assert_eq!(elg_fit_interval(fit, 3, 0.95, &mut lo, &mut hi), ElgStatus::ElgErrDomain);

        let mut em = ptr::null_mut();
        assert_eq!(elg_fit_em(ds, 10.0, 1.5, 0.8, 0, &mut em), ElgStatus::ElgOk);
        let mut ll_em = 0.0;
        let mut conv_em = false;
        assert_eq!(
            elg_fit_estimates(em, &mut a, &mut t, &mut p, &mut ll_em, &mut conv_em),
            ElgStatus::ElgOk
        );
        assert!(conv_em);
        assert!((ll_em - ll).abs() < 1e-4);
        let mut none = ptr::null_mut();
        assert_eq!(elg_fit_em(ds, 2.0, 1.0, -0.5, 0, &mut none), ElgStatus::ElgErrDomain);

        let (mut omega, mut pv, mut df) = (0.0, 0.0, 0);
        assert_eq!(elg_lr_test(ds, ElgNull::ElgNullLg, &mut omega, &mut pv, &mut df), ElgStatus::ElgOk);
        assert_eq!(df, 1);
        assert!((omega - 7.5667).abs() < 1e-3);
        let mut omega2 = 0.0;
        assert_eq!(elg_lr_test(ds, ElgNull::ElgNullLindley, &mut omega2, &mut pv, &mut df), ElgStatus::ElgOk);
        assert_eq!(df, 2);
        assert!(omega2 >= omega);

        elg_fit_free(em);
        elg_fit_free(fit);
        elg_dataset_free(ds);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/elg.h")).unwrap();
    let source = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 18);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from elg.h");
    }
    assert!(header.contains("typedef struct ElgDataset ElgDataset") || header.contains("struct ElgDataset;"));
}

use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use mfinv::*;

fn last_error() -> String {
    let p = mfinv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn cascade_exponents_round_trip() {
    let w = [0.6, 0.4];
    let mut spec = ptr::null_mut();
    unsafe {
        assert_eq!(mfinv_cascade_new(w.as_ptr(), ptr::null(), 2, &mut spec), MfinvStatus::Ok);
        let (mut tau, mut theta) = (0.0, 0.0);
        assert_eq!(mfinv_cascade_tau(spec, 2.0, &mut tau), MfinvStatus::Ok);
        assert!((tau - 0.943416471633633).abs() < 1e-12);
        assert_eq!(mfinv_cascade_theta(spec, -tau, &mut theta), MfinvStatus::Ok);
        assert!((theta + 2.0).abs() < 1e-10);
        mfinv_cascade_free(spec);
    }
    assert!(mfinv_last_error().is_null());
}

#[test]
fn errors_set_status_and_message() {
    let w = [0.6, 0.6];
    let mut spec = ptr::null_mut();
    unsafe {
        assert_eq!(mfinv_cascade_new(w.as_ptr(), ptr::null(), 2, &mut spec), MfinvStatus::Validation);
        assert!(spec.is_null());
        assert!(last_error().contains("sum"), "{}", last_error());

        assert_eq!(mfinv_cascade_new(ptr::null(), ptr::null(), 2, &mut spec), MfinvStatus::NullPointer);
        assert!(last_error().contains("weights"));

        let zero = [0.5, 0.0, 0.5];
        let mut out = 0.0;
        assert_eq!(mfinv_log_moment_sum(zero.as_ptr(), 3, -1.0, &mut out), MfinvStatus::Domain);
        assert_eq!(mfinv_log_moment_sum(zero.as_ptr(), 3, 2.0, &mut out), MfinvStatus::Ok);
        assert!((out - 0.5f64.ln()).abs() < 1e-15);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        mfinv_series_free(ptr::null_mut());
        mfinv_curve_free(ptr::null_mut());
        mfinv_report_free(ptr::null_mut());
        mfinv_cascade_free(ptr::null_mut());
        assert_eq!(mfinv_series_len(ptr::null()), 0);
        assert_eq!(mfinv_curve_len(ptr::null()), 0);
        let mut v = 0.0;
        assert_eq!(mfinv_cascade_tau(ptr::null(), 1.0, &mut v), MfinvStatus::NullPointer);
    }
}

#[test]
fn uniform_series_passes_inversion_check() {
    let values = vec![1.0; 1 << 14];
    unsafe {
        let mut series = ptr::null_mut();
        assert_eq!(mfinv_series_new(values.as_ptr(), values.len(), &mut series), MfinvStatus::Ok);
        assert_eq!(mfinv_series_len(series), 1 << 14);

        let (mut tau, mut theta) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(mfinv_direct_exponents(series, -2.0, 4.0, 0.5, &mut tau), MfinvStatus::Ok, "{}", last_error());
        assert_eq!(mfinv_inverse_exponents(series, -2.0, 4.0, 0.5, &mut theta), MfinvStatus::Ok, "{}", last_error());
        assert_eq!(mfinv_curve_len(tau), 13);
        let (mut q, mut t, mut se) = (0.0, 0.0, 0.0);
        assert_eq!(mfinv_curve_get(tau, 4, &mut q, &mut t, &mut se), MfinvStatus::Ok);
        assert_eq!(q, 0.0);
        assert!((t + 1.0).abs() < 1e-12);
        assert_eq!(mfinv_curve_get(tau, 13, &mut q, ptr::null_mut(), ptr::null_mut()), MfinvStatus::Validation);

        let mut report = ptr::null_mut();
        assert_eq!(mfinv_inversion_check(tau, theta, &mut report), MfinvStatus::Ok);
        let (mut diff, mut ok, mut cov) = (f64::NAN, false, 0.0);
        assert_eq!(mfinv_report_summary(report, &mut diff, &mut ok, &mut cov), MfinvStatus::Ok);
        assert!(diff < 1e-9, "{diff}");
        assert!(ok);
        assert!(cov > 0.3);

        mfinv_report_free(report);
        mfinv_curve_free(tau);
        mfinv_curve_free(theta);
        mfinv_series_free(series);
    }
}

#[test]
fn cascade_series_matches_length() {
    let w = [0.7, 0.3];
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(mfinv_cascade_new(w.as_ptr(), ptr::null(), 2, &mut spec), MfinvStatus::Ok);
        let mut series = ptr::null_mut();
        assert_eq!(mfinv_series_from_cascade(spec, 10, true, 7, &mut series), MfinvStatus::Ok);
        assert_eq!(mfinv_series_len(series), 1024);
        mfinv_series_free(series);
        mfinv_cascade_free(spec);
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/mfinv.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["mfinv_cascade_new", "mfinv_inversion_check", "mfinv_last_error", "MFINV_STATUS_OK"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    let src = std::env::temp_dir().join("mfinv_header_check.c");
    std::fs::write(
        &src,
        "#include \"mfinv.h\"\nint main(void) { MfinvSeries *s = 0; return (int)mfinv_series_len(s); }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}

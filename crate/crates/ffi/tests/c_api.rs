use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use mbsindy_ffi::*;

fn last_error() -> String {
    let p = mbs_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { mbs_string_free(p) };
    s
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { mbs_string_free(p) };
    s
}

#[test]
fn simulate_discover_replay_round_trip() {
    unsafe {
        let mut d: *mut MbsDataset = ptr::null_mut();
        assert_eq!(mbs_simulate(MbsCase::Planar, 0.5, 1.0, 3, &mut d), MbsStatus::Ok);
        assert_eq!(mbs_dataset_snapshot_count(d), 21);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(mbs_dataset_write(d, path.as_ptr()), MbsStatus::Ok);
        let mut back: *mut MbsDataset = ptr::null_mut();
        assert_eq!(mbs_dataset_read(path.as_ptr(), &mut back), MbsStatus::Ok);
        assert_eq!(mbs_dataset_snapshot_count(back), 21);

        let mut noisy: *mut MbsDataset = ptr::null_mut();
        assert_eq!(mbs_dataset_corrupt(back, 0.01, 1, &mut noisy), MbsStatus::Ok);

        let mut r: *mut MbsReport = ptr::null_mut();
        assert_eq!(mbs_discover(d, MbsProblem::Stefan, -1.0, 0, &mut r), MbsStatus::Ok);
        let eq = take_string(mbs_report_equation(r));
        assert!(eq.starts_with("d(xi_n)/dt = "), "{eq}");
        assert_eq!(mbs_report_feature_count(r), 11);
        let mut coeffs = [0.0; 11];
        let mut n = 0usize;
        assert_eq!(mbs_report_coefficients(r, coeffs.as_mut_ptr(), coeffs.len(), &mut n), MbsStatus::Ok);
        assert_eq!(n, 11);
        let mut eps = f64::NAN;
        assert_eq!(mbs_report_epsilon_c(r, &mut eps), MbsStatus::Ok);
        assert!(eps.is_finite() && eps >= 0.0);

        let toml = take_string(mbs_report_to_toml(r));
        let ctoml = CString::new(toml.clone()).unwrap();
        let mut r2: *mut MbsReport = ptr::null_mut();
        assert_eq!(mbs_report_from_toml(ctoml.as_ptr(), &mut r2), MbsStatus::Ok);
        assert_eq!(take_string(mbs_report_to_toml(r2)), toml);

        if coeffs[2] != 0.0 {
            let mut area = f64::NAN;
            assert_eq!(mbs_replay(d, r, 0.5, &mut area), MbsStatus::Ok);
            assert!(area >= 0.0);
        }

        mbs_report_free(r2);
        mbs_report_free(r);
        mbs_dataset_free(noisy);
        mbs_dataset_free(back);
        mbs_dataset_free(d);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        assert_eq!(mbs_simulate(MbsCase::Planar, 0.5, 1.0, 0, ptr::null_mut()), MbsStatus::NullPointer);
        assert!(last_error().contains("out"));

        let missing = CString::new("/nonexistent/mbsindy/dataset").unwrap();
        let mut d: *mut MbsDataset = ptr::null_mut();
        assert_eq!(mbs_dataset_read(missing.as_ptr(), &mut d), MbsStatus::Io);
        assert!(d.is_null());
        assert!(last_error().contains("nonexistent"));

        let mut d: *mut MbsDataset = ptr::null_mut();
        assert_eq!(mbs_simulate(MbsCase::Planar, 0.5, 0.2, 0, &mut d), MbsStatus::Ok);
        let mut noisy: *mut MbsDataset = ptr::null_mut();
        assert_eq!(mbs_dataset_corrupt(d, -1.0, 0, &mut noisy), MbsStatus::InvalidArgument);

        let bad = CString::new("not = [valid").unwrap();
        let mut r: *mut MbsReport = ptr::null_mut();
        assert_eq!(mbs_report_from_toml(bad.as_ptr(), &mut r), MbsStatus::Io);
        assert!(mbs_report_to_toml(ptr::null()).is_null());
        assert_eq!(mbs_dataset_snapshot_count(ptr::null()), 0);

        mbs_dataset_free(ptr::null_mut());
        mbs_report_free(ptr::null_mut());
        mbs_string_free(ptr::null_mut());
        mbs_dataset_free(d);
    }
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("mbsindy.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"mbsindy.h\"\n\
         int probe(void) {\n\
           MbsDataset *d = NULL;\n\
           MbsStatus s = mbs_simulate(MBS_CASE_PLANAR, 0.5, 1.0, 0, &d);\n\
           mbs_dataset_free(d);\n\
           return (int)s;\n\
         }\n",
    )
    .unwrap();
    for lang in ["c", "c++"] {
        let out = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(&include)
            .arg(&src)
            .output()
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

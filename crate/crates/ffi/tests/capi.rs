use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use berry_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(berry_last_error()) }.to_string_lossy().into_owned()
}

fn equator() -> *mut BerryPath {
    let json = CString::new(r#"{"preset": "spherical_cap", "params": {"theta": 1.5707963267948966}}"#).unwrap();
    let mut path = ptr::null_mut();
    assert_eq!(unsafe { berry_path_from_json(json.as_ptr(), &mut path) }, BerryStatus::Ok);
    path
}

#[test]
fn spin_equator_holonomy() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(berry_model_spin_dipole(1, &mut model), BerryStatus::Ok);
        assert_eq!(berry_model_param_dim(model), 3);
        assert_eq!(berry_model_hilbert_dim(model), 2);
        let path = equator();
        let label = CString::new("+1/2").unwrap();
        let (mut re, mut im, mut k) = ([0.0; 1], [0.0; 1], 0usize);
        let mut diag = BerryDiagnostics::default();
        let status = berry_holonomy(
            model,
            path,
            label.as_ptr(),
            BerryMethod::Ode,
            1024,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            1,
            &mut k,
            &mut diag,
        );
        assert_eq!(status, BerryStatus::Ok, "{}", last_error());
        assert_eq!(k, 1);
        assert!((re[0] + 1.0).abs() < 1e-8 && im[0].abs() < 1e-8);
        assert!(diag.unitarity_residual < 1e-10 && diag.steps >= 1024);
        berry_path_free(path);
        berry_model_free(model);
    }
}

#[test]
fn lambda_dark_buffer_and_classification() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(berry_model_lambda(&mut model), BerryStatus::Ok);
        let dark = CString::new("dark").unwrap();
        let mut k = 0;
        assert_eq!(berry_model_branch_degeneracy(model, dark.as_ptr(), &mut k), BerryStatus::Ok);
        assert_eq!(k, 2);
        let path = equator();
        let (mut re, mut im) = ([0.0; 4], [0.0; 4]);
        let status = berry_holonomy(
            model,
            path,
            dark.as_ptr(),
            BerryMethod::Wilson,
            4096,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            3,
            &mut k,
            ptr::null_mut(),
        );
        assert_eq!(status, BerryStatus::BufferTooSmall);
        assert_eq!(k, 2);
        let status = berry_holonomy(
            model,
            path,
            dark.as_ptr(),
            BerryMethod::Wilson,
            4096,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            4,
            &mut k,
            ptr::null_mut(),
        );
        assert_eq!(status, BerryStatus::Ok, "{}", last_error());
        let norm: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum();
        assert!((norm - 2.0).abs() < 1e-8);
        let (mut w, mut t) = (99i64, false);
        assert_eq!(berry_classify(model, dark.as_ptr(), 0, &mut w, &mut t), BerryStatus::Ok);
        assert_eq!((w, t), (0, true));
        berry_path_free(path);
        berry_model_free(model);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(berry_model_spin_dipole(0, &mut model), BerryStatus::Schema);
        assert!(!last_error().is_empty());
        assert_eq!(berry_model_lambda(ptr::null_mut()), BerryStatus::NullArgument);
        let bad = CString::new(r#"{"name": "hubbard"}"#).unwrap();
        assert_eq!(berry_model_from_json(bad.as_ptr(), &mut model), BerryStatus::Schema);
        let json = CString::new(r#"{"name": "planar_spin", "params": {"s": 0.5, "J": 1}}"#).unwrap();
        assert_eq!(berry_model_from_json(json.as_ptr(), &mut model), BerryStatus::Ok);
        let coords = [1.0, 0.0, 0.5, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        let mut path = ptr::null_mut();
        assert_eq!(berry_path_from_nodes(2, 5, coords.as_ptr(), &mut path), BerryStatus::Ok);
        let label = CString::new("+1/2").unwrap();
        let (mut re, mut im, mut k) = ([0.0; 1], [0.0; 1], 0);
        let status = berry_holonomy(
            model,
            path,
            label.as_ptr(),
            BerryMethod::Ode,
            64,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            1,
            &mut k,
            ptr::null_mut(),
        );
        assert_eq!(status, BerryStatus::Domain);
        assert!(last_error().contains("node"), "{}", last_error());
        berry_path_free(path);
        berry_model_free(model);
        berry_model_free(ptr::null_mut());
    }
}

#[test]
fn scenario_round_trip() {
    unsafe {
        let s =
            CString::new(r#"{"model": {"name": "lambda_system"}, "branch": "dark", "outputs": ["topology"]}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(berry_run_scenario(s.as_ptr(), &mut out), BerryStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&CStr::from_ptr(out).to_string_lossy()).unwrap();
        assert_eq!(v["results"]["topology"]["det_winding"], 0);
        berry_string_free(out);
        let bad = CString::new("{").unwrap();
        assert_eq!(berry_run_scenario(bad.as_ptr(), &mut out), BerryStatus::Schema);
        assert!(out.is_null());
        assert!(!CStr::from_ptr(berry_version()).to_bytes().is_empty());
    }
}

fn lib_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "berry.h"

int main(void) {
    BerryModel *model = NULL;
    BerryPath *path = NULL;
    if (berry_model_spin_dipole(1, &model) != BERRY_STATUS_OK) return 10;
    if (berry_path_from_json("{\"preset\": \"spherical_cap\", \"params\": {\"theta\": 1.0471975511965976}}", &path)
        != BERRY_STATUS_OK) return 11;
    double re[1], im[1];
    size_t k = 0;
    BerryDiagnostics diag;
    if (berry_holonomy(model, path, "+1/2", BERRY_METHOD_ODE, 1024, re, im, 1, &k, &diag) != BERRY_STATUS_OK) {
        fprintf(stderr, "%s\n", berry_last_error());
        return 12;
    }
    /* cap at theta = pi/3 encloses solid angle pi: factor exp(-i pi/2) */
    if (k != 1 || fabs(re[0]) > 1e-8 || fabs(im[0] + 1.0) > 1e-8) return 13;
    if (berry_model_spin_dipole(0, &model) != BERRY_STATUS_SCHEMA) return 14;
    berry_path_free(path);
    berry_model_free(model);
    printf("ok %s\n", berry_version());
    return 0;
}
"#;

#[test]
fn c_program_links_against_header() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let libs = lib_dir();
    assert!(libs.join("libberry_ffi.so").exists() || libs.join("libberry_ffi.dylib").exists(), "{libs:?}");
    let exe = dir.path().join("main");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg(&src)
        .arg(format!("-I{}", include.display()))
        .arg(format!("-L{}", libs.display()))
        .arg(format!("-Wl,-rpath,{}", libs.display()))
        .args(["-lberry_ffi", "-lm", "-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

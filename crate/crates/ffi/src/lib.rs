//! C ABI over berry-core.
//!
//! Every fallible call returns a [`BerryStatus`]; on failure the message is
//! available from [`berry_last_error`] on the same thread. Handles are
//! opaque and must be released with the matching `_free` function. Strings
//! handed out by the library are released with [`berry_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use berry_core::gauge::{classify_bundle, ClassifyOptions};
use berry_core::models::{make_lambda_system, make_planar_spin, make_spin_dipole, ParameterPoint, SharedModel, Spin};
use berry_core::path::ParameterPath;
use berry_core::scenario::{build_model, build_path, exit_code, run_scenario_str, ModelSpec, PathSpec};
use berry_core::transport::{holonomy, Method, TransportOptions};
use berry_core::Error;

/// Status codes; 2, 3 and 4 match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BerryStatus {
    Ok = 0,
    NullArgument = 1,
    Schema = 2,
    Domain = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BerryMethod {
    Ode = 0,
    Wilson = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BerryDiagnostics {
    pub unitarity_residual: f64,
    pub min_gap: f64,
    pub steps: usize,
    pub richardson_error_estimate: f64,
}

/// Opaque Hamiltonian family.
pub struct BerryModel(SharedModel);

/// Opaque parameter path.
pub struct BerryPath(ParameterPath);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Buffer(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BerryStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BerryStatus::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            match exit_code(&e) {
                3 => BerryStatus::Domain,
                4 => BerryStatus::Numerical,
                _ => BerryStatus::Schema,
            }
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(&format!("null pointer passed for `{name}`"));
            BerryStatus::NullArgument
        }
        Ok(Err(Failure::Buffer(msg))) => {
            set_error(&msg);
            BerryStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic");
            BerryStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Core(Error::Schema(format!("`{name}` is not UTF-8"))))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn model_arg<'a>(p: *const BerryModel) -> Result<&'a BerryModel, Failure> {
    p.as_ref().ok_or(Failure::Null("model"))
}

fn emit_model(out: &mut *mut BerryModel, model: SharedModel) {
    *out = Box::into_raw(Box::new(BerryModel(model)));
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn berry_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn berry_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn berry_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Spin dipole `H = b·S` for spin `twice_s / 2`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn berry_model_spin_dipole(twice_s: u32, out: *mut *mut BerryModel) -> BerryStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        emit_model(out, Arc::new(make_spin_dipole(Spin::from_twice(twice_s)?)));
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn berry_model_lambda(out: *mut *mut BerryModel) -> BerryStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        emit_model(out, Arc::new(make_lambda_system()));
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn berry_model_planar_spin(
    twice_s: u32,
    j: i64,
    eps: f64,
    out: *mut *mut BerryModel,
) -> BerryStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        emit_model(out, Arc::new(make_planar_spin(Spin::from_twice(twice_s)?, j, eps)?));
        Ok(())
    })
}

/// Model from a JSON object `{"name": ..., "params": {...}}`, as in scenario files.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn berry_model_from_json(json: *const c_char, out: *mut *mut BerryModel) -> BerryStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let spec: ModelSpec = serde_json::from_str(text).map_err(Error::from)?;
        emit_model(out, build_model(&spec)?);
        Ok(())
    })
}

/// # Safety
/// `model` must come from a `berry_model_*` constructor, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn berry_model_free(model: *mut BerryModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parameter-space dimension, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn berry_model_param_dim(model: *const BerryModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.param_dim())
}

/// Hilbert-space dimension, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn berry_model_hilbert_dim(model: *const BerryModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.hilbert_dim())
}

/// Degeneracy K of the branch with the given label.
///
/// # Safety
/// `model` must be a live handle, `label` a NUL-terminated string and `out_k` valid.
#[no_mangle]
pub unsafe extern "C" fn berry_model_branch_degeneracy(
    model: *const BerryModel,
    label: *const c_char,
    out_k: *mut usize,
) -> BerryStatus {
    guard(|| {
        let m = model_arg(model)?;
        let label = str_arg(label, "label")?;
        *out_arg(out_k, "out_k")? = m.0.branch(label)?.degeneracy;
        Ok(())
    })
}

/// Polyline through `count` points of dimension `dim`, stored row by row.
///
/// # Safety
/// `coords` must point to `dim * count` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn berry_path_from_nodes(
    dim: usize,
    count: usize,
    coords: *const f64,
    out: *mut *mut BerryPath,
) -> BerryStatus {
    guard(|| {
        if coords.is_null() {
            return Err(Failure::Null("coords"));
        }
        let out = out_arg(out, "out")?;
        if dim == 0 {
            return Err(Error::Schema("path dimension must be positive".into()).into());
        }
        let flat = std::slice::from_raw_parts(coords, dim * count);
        let nodes = flat.chunks(dim).map(|c| ParameterPoint(c.to_vec())).collect();
        *out = Box::into_raw(Box::new(BerryPath(ParameterPath::from_nodes(nodes)?)));
        Ok(())
    })
}

/// Path from its scenario JSON form: a preset object or `{"nodes": [...]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn berry_path_from_json(json: *const c_char, out: *mut *mut BerryPath) -> BerryStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let spec: PathSpec = serde_json::from_str(text).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(BerryPath(build_path(&spec)?)));
        Ok(())
    })
}

/// # Safety
/// `path` must come from a `berry_path_*` constructor, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn berry_path_free(path: *mut BerryPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Non-abelian holonomy of a closed path.
///
/// The K×K unitary is written row-major into `re`/`im`, which must hold
/// `capacity` doubles each. `out_k` receives K even when the buffers are too
/// small. `diagnostics` may be NULL.
///
/// # Safety
/// All non-NULL pointers must be valid for the sizes described above.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn berry_holonomy(
    model: *const BerryModel,
    path: *const BerryPath,
    branch: *const c_char,
    method: BerryMethod,
    steps: usize,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    out_k: *mut usize,
    diagnostics: *mut BerryDiagnostics,
) -> BerryStatus {
    guard(|| {
        let m = model_arg(model)?;
        let p = path.as_ref().ok_or(Failure::Null("path"))?;
        let label = str_arg(branch, "branch")?;
        let out_k = out_arg(out_k, "out_k")?;
        let br = m.0.branch(label)?;
        *out_k = br.degeneracy;
        if capacity < br.degeneracy * br.degeneracy {
            return Err(Failure::Buffer(format!(
                "holonomy needs {} entries, buffer holds {capacity}",
                br.degeneracy * br.degeneracy
            )));
        }
        if re.is_null() || im.is_null() {
            return Err(Failure::Null("re/im"));
        }
        let method = match method {
            BerryMethod::Ode => Method::Ode,
            BerryMethod::Wilson => Method::Wilson,
        };
        let opts = TransportOptions { steps, ..Default::default() };
        let h = holonomy(m.0.as_ref(), &p.0, &br, method, &opts)?;
        for (i, z) in h.unitary.matrix().as_slice().iter().enumerate() {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
        if let Some(d) = diagnostics.as_mut() {
            *d = BerryDiagnostics {
                unitarity_residual: h.diagnostics.unitarity_residual,
                min_gap: h.diagnostics.min_gap,
                steps: h.diagnostics.steps,
                richardson_error_estimate: h.diagnostics.richardson_error_estimate,
            };
        }
        Ok(())
    })
}

/// Bundle classification over the model's base; `samples` of 0 uses the default.
///
/// # Safety
/// `model` must be live, `branch` NUL-terminated, the outputs valid.
#[no_mangle]
pub unsafe extern "C" fn berry_classify(
    model: *const BerryModel,
    branch: *const c_char,
    samples: usize,
    out_det_winding: *mut i64,
    out_trivializable: *mut bool,
) -> BerryStatus {
    guard(|| {
        let m = model_arg(model)?;
        let label = str_arg(branch, "branch")?;
        let w = out_arg(out_det_winding, "out_det_winding")?;
        let t = out_arg(out_trivializable, "out_trivializable")?;
        let mut opts = ClassifyOptions::default();
        if samples > 0 {
            opts.samples = samples;
        }
        let report = classify_bundle(&m.0, &m.0.branch(label)?, &opts)?;
        *w = report.det_winding;
        *t = report.trivializable;
        Ok(())
    })
}

/// Run a scenario document and return the report JSON through `out_json`
/// (free with [`berry_string_free`]); it is set to NULL on failure.
///
/// # Safety
/// `scenario_json` must be NUL-terminated and `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn berry_run_scenario(scenario_json: *const c_char, out_json: *mut *mut c_char) -> BerryStatus {
    guard(|| {
        let text = str_arg(scenario_json, "scenario_json")?;
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let report = run_scenario_str(text)?;
        let c = CString::new(report.to_json()).map_err(|_| Error::Schema("report contains NUL".into()))?;
        *out = c.into_raw();
        Ok(())
    })
}
